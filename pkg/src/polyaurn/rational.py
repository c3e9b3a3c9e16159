"""Exact rational parsing and rendering.

Parameters arrive as strings ("1/2", "0.5", "3") or numbers and are kept as
:class:`fractions.Fraction` so that ``0.5`` and ``1/2`` are the same input.
"""

from fractions import Fraction
from numbers import Rational


def to_rational(value, field="value"):
    """Convert ``value`` to an exact Fraction.

    Floats are converted through their shortest decimal repr, so ``0.1``
    becomes ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, bool):
        raise ValueError(f"{field}: expected a rational, got a boolean")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{field}: cannot parse {value!r} as a rational") from exc
    raise ValueError(f"{field}: expected a rational, got {type(value).__name__}")


def format_rational(q):
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def render(q):
    """JSON-ready rendering: lowest-terms ``p/q`` plus a float approximation."""
    return {"rational": format_rational(q), "decimal": float(q)}
