"""p-adic singular moduli for real quadratic fields: cocycles, Eisenstein families, checks."""

__version__ = "0.1.0"
