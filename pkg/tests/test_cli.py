import json

import pytest

from rmsingular import cli
from rmsingular.cocycles import CocycleEvaluation
from rmsingular.padic import PadicQuad

FAMILY = ["--D", "12", "--D1", "-3", "--D2", "-4", "--p", "5"]


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = cli.main(argv + ["--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def test_verify_gz_single_pair(tmp_path):
    code, text = run(["verify-gz", "--D1", "-3", "--D2", "-4"], tmp_path)
    assert code == 0
    data = json.loads(text)
    assert data["records"][0]["rhs_int"] == 12 and data["all_match"]


def test_small_sweep(tmp_path):
    code, text = run(["verify-gz", "--bound", "150"], tmp_path)
    assert code == 0 and json.loads(text)["pairs"] > 5


@pytest.mark.parametrize(
    "argv",
    [
        ["verify-gz", "--D1", "-4", "--D2", "-8"],
        ["verify-gz", "--D1", "-3"],
        ["verify-dpv1", "--D", "12", "--D1", "-3", "--D2", "-4", "--p", "11"],
        ["rm-eval", "--D", "16", "--p", "5"],
        ["constant-term", "--D", "12", "--D1", "-3", "--D2", "-4", "--p", "11"],
        ["no-such-command"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    code, _ = run(argv, tmp_path)
    assert code == 2


def test_positive_genus_prime_is_rejected(tmp_path):
    # 11 is inert in Q(sqrt 5) but X_0(11) has genus one
    code, _ = run(["verify-dpv1", "--D", "5", "--D1", "-3", "--D2", "-4", "--p", "11"], tmp_path)
    assert code == 2


def test_precision_shortfall_exits_3(tmp_path, capsys):
    code, text = run(["rm-eval", "--D", "12", "--p", "5", "--prec", "3"], tmp_path)
    assert code == 3 and text is None
    assert "precision" in capsys.readouterr().err


def test_mismatch_exits_1(tmp_path, monkeypatch):
    import rmsingular.classical as classical

    monkeypatch.setattr(classical, "gz_rhs", lambda D1, D2: 13)
    code, text = run(["verify-gz", "--D1", "-3", "--D2", "-4"], tmp_path)
    assert code == 1 and json.loads(text)["all_match"] is False


def test_reruns_are_byte_identical(tmp_path):
    argv = ["verify-dpv1", *FAMILY, "--prec", "3", "--terms", "3"]
    c1, t1 = run(argv, tmp_path, "a.json")
    c2, t2 = run(argv, tmp_path, "b.json")
    assert c1 == c2 == 0 and t1 == t2


def test_cache_does_not_change_output(tmp_path):
    argv = ["constant-term", *FAMILY, "--prec", "3", "--trunc", "4"]
    c0, plain = run(argv, tmp_path, "plain.json")
    cache = ["--cache-dir", str(tmp_path / "cache")]
    c1, cold = run(argv + cache, tmp_path, "cold.json")
    c2, warm = run(argv + cache, tmp_path, "warm.json")
    assert c0 == c1 == c2 == 0
    assert plain == cold == warm
    assert len(list((tmp_path / "cache").glob("*.json"))) == 1


def test_stale_cache_entries_are_ignored(tmp_path):
    cache = cli.Cache(str(tmp_path))
    cache.put("x", [1], {"v": 1})
    path = next(tmp_path.glob("*.json"))
    data = json.loads(path.read_text())
    data["version"] = "0.0.0"
    path.write_text(json.dumps(data))
    assert cache.get("x", [1]) is None
    assert cli.Cache(None).get("x", [1]) is None


def test_rm_eval_json_round_trips(tmp_path):
    code, text = run(["rm-eval", "--D", "12", "--p", "5", "--cocycle", "winding"], tmp_path)
    assert code == 0
    for r in json.loads(text)["results"]:
        ev = r["evaluation"]
        assert CocycleEvaluation.from_json(ev).to_json() == ev
        assert PadicQuad.from_json(ev["value"]).to_json() == ev["value"]


def test_json_flag_prints_the_report(capsys):
    assert cli.main(["verify-gz", "--D1", "-3", "--D2", "-4", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "verify-gz"
