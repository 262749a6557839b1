"""Command line entry point: rmsingular verify-gz | rm-eval | verify-dpv1 | constant-term."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from fractions import Fraction

from . import __version__
from .padic import PadicDomainError, PrecisionError, PrimeContext

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
SCHEMA = 1
MAX_ESCALATIONS = 3


class UsageError(ValueError):
    pass


# caching ------------------------------------------------------------------------------------


class Cache:
    """Content-addressed JSON files; a missing directory disables caching."""

    def __init__(self, directory):
        self.directory = directory

    def key(self, command, descriptor) -> str:
        blob = json.dumps({"cmd": command, "d": descriptor, "v": __version__}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def get(self, command, descriptor):
        if not self.directory:
            return None
        path = os.path.join(self.directory, self.key(command, descriptor) + ".json")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, ValueError):
            return None
        if data.get("schema") != SCHEMA or data.get("version") != __version__:
            return None
        return data["result"]

    def put(self, command, descriptor, result):
        if not self.directory:
            return
        os.makedirs(self.directory, exist_ok=True)
        key = self.key(command, descriptor)
        payload = {"schema": SCHEMA, "version": __version__, "command": command,
                   "descriptor": descriptor, "result": result}
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, os.path.join(self.directory, key + ".json"))

    def cached(self, command, descriptor, fn):
        hit = self.get(command, descriptor)
        if hit is not None:
            return hit
        result = fn()
        self.put(command, descriptor, result)
        return result


# validation ----------------------------------------------------------------------------------


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flags: " + ", ".join("--" + n for n in missing))


def _inert_instance(D, p):
    from .quadratic import is_discriminant, is_square, kronecker

    if D <= 0 or not is_discriminant(D) or is_square(D):
        raise UsageError(f"D = {D} is not a positive non-square discriminant")
    if kronecker(D, p) != -1:
        raise UsageError(f"p = {p} is not inert in Q(sqrt {D})")


def _genus0(p):
    from .eisenstein import GENUS0_PRIMES

    if p not in GENUS0_PRIMES:
        raise UsageError(f"p = {p}: X_0(p) has positive genus; unsupported at desk scale")


def _family(args):
    from .eisenstein import FamilyInstance

    _require(args, "D", "D1", "D2", "p")
    _inert_instance(args.D, args.p)
    _genus0(args.p)
    try:
        return FamilyInstance(args.D, args.D1, args.D2, args.p, args.prec)
    except (ValueError, PadicDomainError) as exc:
        raise UsageError(str(exc)) from exc


# pipelines -----------------------------------------------------------------------------------


def gz_report(D1, D2, terms=60, dps=60):
    from .classical import verify_gz_pair

    return verify_gz_pair(D1, D2, terms=terms, dps=dps, escalations=MAX_ESCALATIONS)


def dpv1_table(inst, n_max, level=None):
    """Eisenstein-route coefficients of e_ord of the derivative next to the cocycle route."""
    from .cocycles import hecke_translate
    from .eisenstein import eis_diag_coeff, ordinary_projection
    from .quadratic import chi_c_tau, rm_points

    ctx = inst.ctx
    A = inst.N
    vanishing = all(eis_diag_coeff(inst, 1, n) == 0 for n in range(1, 31))
    f_ord = ordinary_projection(None, inst.p, n_max, A, inst=inst)
    taus = rm_points(inst.D, inst.p)
    chis = [chi_c_tau(t, inst.chi) for t in taus]
    rows = []
    ok = True
    for n in range(1, n_max + 1):
        total = ctx.zero()
        for tau, c in zip(taus, chis):
            total = total + hecke_translate(tau, n, ctx, level=level).log_norm * ctx(c)
        lhs = f_ord[n]
        diff = lhs - total
        agree = A if diff.is_zero else min(A, diff.val)
        rows.append({"n": n, "eisenstein": lhs.to_json(), "cocycle": total.to_json(), "agree_digits": agree})
        ok = ok and agree >= A
    return {"instance": inst.to_json(), "k1_vanishing_n_le_30": vanishing, "precision": A,
            "rows": rows, "match": ok and vanishing}


def norm_side(inst, depth=None, evaluations=None):
    """(1/12) sum over tau of chi(c_tau) log_p Nm J_DR[tau]."""
    from .cocycles import dr_eval
    from .quadratic import chi_c_tau, rm_points

    ctx = inst.ctx
    total = ctx.zero()
    evs = []
    for tau in rm_points(inst.D, inst.p):
        ev = evaluations.get(tuple(tau.form.as_list())) if evaluations else None
        ev = ev or dr_eval(tau, ctx, depth=depth)
        evs.append(ev)
        total = total + ev.log_norm * ctx(chi_c_tau(tau, inst.chi))
    return total / ctx(12), evs


def constant_term_report(inst, depth=None, prec=3):
    """a_0 of e_ord against the norm side, under both constant-term normalisations."""
    from .eisenstein import extract_constant_term, ordinary_projection, rho_default, rho_true

    f_ord = ordinary_projection(None, inst.p, 5, inst.N, inst=inst)
    a0_default, a1 = extract_constant_term(f_ord, inst.p, inst.N, rho_default(inst.p))
    a0_true, _ = extract_constant_term(f_ord, inst.p, inst.N, rho_true(inst.p))
    ns, evs = norm_side(inst, depth)
    ctx = inst.ctx

    def agree(x, y):
        d = x - y
        return prec if d.is_zero else min(prec, d.val)

    checks = {
        "a0_default_eq_minus2_norm_side": agree(a0_default, ns * ctx(-2)),
        "a0_true_eq_minus_norm_side": agree(a0_true, -ns),
    }
    return {
        "instance": inst.to_json(),
        "a1": a1.to_json(),
        "a0_rho_default": a0_default.to_json(),
        "a0_rho_true": a0_true.to_json(),
        "norm_side": ns.to_json(),
        "rho_default": str(rho_default(inst.p)),
        "rho_true": str(rho_true(inst.p)),
        "agree_digits": checks,
        "modulus_digits": prec,
        "match": all(v >= prec for v in checks.values()),
        "evaluations": [e.to_json() for e in evs],
    }


def rm_eval_report(D, p, cocycle, prec, trunc=None, form=None, recognize=True, slack=5, maxheight=50):
    from .algrec import p_unit_certify, recognize_up_to_ambiguity, split_primes, splitting_check
    from .cocycles import dr_eval, rm_theta_eval, winding_eval
    from .quadratic import BinaryQF, RMPoint, rm_points

    ctx = PrimeContext(p, prec)
    taus = [RMPoint(BinaryQF(*form), p)] if form else rm_points(D, p)
    out = []
    for tau in taus:
        if cocycle == "winding":
            ev = winding_eval(tau, ctx, level=trunc)
        elif cocycle == "dr":
            ev = dr_eval(tau, ctx, depth=trunc)
        else:
            others = [t for t in rm_points(D, p) if t.form != tau.form] or [tau]
            ev = rm_theta_eval(others[0], tau, ctx, level=trunc if trunc is not None else 2)
        rec = {"attempted": False}
        if recognize and cocycle == "dr":
            hit = recognize_up_to_ambiguity(ev.value, 4, maxheight, slack=slack)
            rec = {"attempted": True, "found": hit is not None}
            if hit:
                ok, cert = p_unit_certify(hit["poly"], p)
                primes = split_primes(D, 10, exclude=(p, D))
                rec.update({
                    "poly": hit["poly"],
                    "zeta_index": hit["zeta_index"],
                    "p_shift": hit["p_shift"],
                    "power_relation": "value^12 = root^12 up to p^Z",
                    "p_unit": ok,
                    "certificate": cert,
                    "splitting": splitting_check(hit["poly"], D, primes),
                })
        out.append({"evaluation": ev.to_json(), "recognition": rec})
    return {"D": D, "p": p, "cocycle": cocycle, "prec": prec, "results": out}


# commands ------------------------------------------------------------------------------------


def cmd_verify_gz(args, cache):
    from .classical import gz_pairs

    if args.D1 is not None or args.D2 is not None:
        _require(args, "D1", "D2")
        from .classical import _check_pair

        try:
            _check_pair(args.D1, args.D2)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        pairs = [(args.D1, args.D2)]
    else:
        pairs = gz_pairs(args.bound)
    records = [cache.cached("gz", [a, b, args.terms], lambda a=a, b=b: gz_report(a, b, args.terms))
               for a, b in pairs]
    report = {"command": "verify-gz", "pairs": len(records), "records": records,
              "all_match": all(r["match"] for r in records)}
    return report, EXIT_OK if report["all_match"] else EXIT_MISMATCH


def cmd_rm_eval(args, cache):
    _require(args, "D", "p")
    _inert_instance(args.D, args.p)
    form = [int(x) for x in args.form.split(",")] if args.form else None
    desc = [args.D, args.p, args.cocycle, args.prec, args.trunc, form, args.slack]
    report = cache.cached("rm-eval", desc, lambda: rm_eval_report(
        args.D, args.p, args.cocycle, args.prec, args.trunc, form, slack=args.slack))
    report = dict(report, command="rm-eval")
    status = EXIT_OK
    for r in report["results"]:
        rec = r["recognition"]
        if rec.get("attempted") and (not rec.get("found") or not rec.get("p_unit")
                                     or rec["splitting"]["matches"] != rec["splitting"]["checked"]):
            status = EXIT_MISMATCH
    return report, status


def cmd_verify_dpv1(args, cache):
    inst = _family(args)
    desc = [inst.to_json(), args.terms, args.trunc]
    report = cache.cached("dpv1", desc, lambda: dpv1_table(inst, args.terms, args.trunc))
    report = dict(report, command="verify-dpv1")
    return report, EXIT_OK if report["match"] else EXIT_MISMATCH


def cmd_constant_term(args, cache):
    inst = _family(args)
    desc = [inst.to_json(), args.trunc]
    report = cache.cached("constant", desc, lambda: constant_term_report(inst, args.trunc))
    report = dict(report, command="constant-term")
    return report, EXIT_OK if report["match"] else EXIT_MISMATCH


COMMANDS = {
    "verify-gz": cmd_verify_gz,
    "rm-eval": cmd_rm_eval,
    "verify-dpv1": cmd_verify_dpv1,
    "constant-term": cmd_constant_term,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="rmsingular", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--D", type=int)
    ap.add_argument("--D1", type=int)
    ap.add_argument("--D2", type=int)
    ap.add_argument("--p", type=int)
    ap.add_argument("--prec", type=int, default=4, help="p-adic precision N")
    ap.add_argument("--terms", type=int, default=None,
                    help="q-expansion coefficients for verify-dpv1 (default 5) or q-series terms for verify-gz (default 60)")
    ap.add_argument("--trunc", type=int, default=None, help="truncation level / measure depth")
    ap.add_argument("--bound", type=int, default=2000, help="|D1 D2| bound for the verify-gz sweep")
    ap.add_argument("--cocycle", choices=["winding", "dr", "rm_theta"], default="dr")
    ap.add_argument("--form", help="a,b,c of a single RM point (default: one per narrow class)")
    ap.add_argument("--slack", type=int, default=5, help="recognition slack in p-adic digits")
    ap.add_argument("--cache-dir", default=None)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    return ap


def _summary(report) -> str:
    lines = [f"{report.get('command')}:"]
    for key in ("all_match", "match", "pairs"):
        if key in report:
            lines.append(f"  {key} = {report[key]}")
    for row in report.get("rows", []):
        lines.append(f"  n={row['n']} agree to {row['agree_digits']} digits")
    for r in report.get("results", []):
        ev = r["evaluation"]
        lines.append(f"  form {ev['form']}: value {ev['value']} (prec {ev['prec']})")
        rec = r["recognition"]
        if rec.get("found"):
            sp = rec["splitting"]
            lines.append(f"    poly {rec['poly']} p-unit={rec['p_unit']} splitting {sp['matches']}/{sp['checked']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    cache = Cache(args.cache_dir)
    if args.terms is None:
        args.terms = 60 if args.command == "verify-gz" else 5
    try:
        report, status = COMMANDS[args.command](args, cache)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionError as exc:
        print(f"precision error: {exc} (deficit {exc.deficit}); raise --prec or --trunc", file=sys.stderr)
        return EXIT_RESOURCE
    except MemoryError:
        print("resource error: out of memory; lower --trunc", file=sys.stderr)
        return EXIT_RESOURCE
    report = dict(report, seed=args.seed, version=__version__)
    text = json.dumps(report, sort_keys=True, indent=1, default=_json_default)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.json:
        print(text)
    else:
        print(_summary(report))
    return status


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"not serialisable: {type(x)}")


if __name__ == "__main__":
    sys.exit(main())
