"""Weight schemes for generalized Pólya urns.

A scheme assigns weight ``psi(e)`` to an existing cluster of size ``e`` and
``psi0(n)`` to a fresh draw from the base measure when ``n`` clusters exist.
The exchangeability condition asks that these weights always sum to a fixed
``xi(i)`` that depends only on the number of draws ``i``.

All weights are exact :class:`~fractions.Fraction` values.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Callable, Optional

from .partitions import Partition, bell_number, enumerate_label_sequences
from .rational import format_rational, to_rational

BUILTIN_SCHEMES = ("iid", "random_n", "blackwell_macqueen", "pitman_yor", "fisher")


class ParameterDomainError(ValueError):
    """A scheme parameter lies outside its admissible range."""


class ConditionViolation(ValueError):
    """Predictive weights do not sum to xi(i), or are otherwise inadmissible."""


class ConfigError(ValueError):
    """Malformed scheme configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# Weight families. Module-level so that partial() objects pickle for workers.

def _const(value, _arg):
    return value


def _cluster_size(offset, e):
    return e + offset


def _linear_new(theta, alpha, n):
    return theta + alpha * n


def _capped_new(N, n):
    return Fraction(N - n) if n < N else Fraction(0)


def _fisher_new(theta, N, n):
    return theta * (1 - Fraction(n, N)) if n < N else Fraction(0)


def _shifted_index(offset, i):
    return offset + i


def _table(values, name, k):
    if not 1 <= k <= len(values):
        raise ParameterDomainError(f"{name}({k}) is outside the supplied table (1..{len(values)})")
    return values[k - 1]


@dataclass(frozen=True, eq=False)
class WeightScheme:
    name: str
    psi: Callable[[int], Fraction]
    psi0: Callable[[int], Fraction]
    xi: Callable[[int], Fraction]
    params: dict = field(default_factory=dict)
    # q0 is the same for every n >= 1 (i.i.d., Blackwell-MacQueen).
    constant_new_weight: bool = False
    max_clusters: Optional[int] = None
    config: Optional[dict] = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def raw_weights(self, block_sizes):
        """Unchecked ``(q0, q)`` for a partition with the given block sizes."""
        key = tuple(block_sizes)
        hit = self._cache.get(key)
        if hit is None:
            if key:
                q0 = Fraction(self.psi0(len(key)))
            else:
                q0 = Fraction(1)
            hit = (q0, tuple(Fraction(self.psi(e)) for e in key))
            self._cache[key] = hit
        return hit


@dataclass(frozen=True)
class PredictiveWeights:
    q0: Fraction
    q: tuple
    total: Fraction

    def normalized(self):
        return self.q0 / self.total, tuple(w / self.total for w in self.q)


def make_builtin_scheme(name, **params):
    """Build one of the catalogue schemes.

    ``iid`` takes no parameters; ``random_n`` takes ``N``;
    ``blackwell_macqueen`` takes ``mu_total``; ``pitman_yor`` takes
    ``alpha`` and ``theta``; ``fisher`` takes ``N`` and ``theta``.
    Rational parameters may be given as Fractions, ints, or strings.
    """
    if name == "iid":
        return WeightScheme(
            "iid", partial(_const, Fraction(0)), partial(_const, Fraction(1)),
            partial(_const, Fraction(1)), {}, constant_new_weight=True,
            config={"scheme": "iid"},
        )
    if name == "random_n":
        N = _integer(params, "N")
        if N < 1:
            raise ParameterDomainError(f"N must be a positive integer, got {N}")
        return WeightScheme(
            "random_n", partial(_const, Fraction(1)), partial(_capped_new, N),
            partial(_const, Fraction(N)), {"N": N}, max_clusters=N,
            config={"scheme": "random_n", "N": N},
        )
    if name == "blackwell_macqueen":
        mu = _rational(params, "mu_total")
        if mu <= 0:
            raise ParameterDomainError(f"mu_total must be positive, got {mu}")
        return WeightScheme(
            "blackwell_macqueen", partial(_cluster_size, Fraction(0)), partial(_const, mu),
            partial(_shifted_index, mu), {"mu_total": mu}, constant_new_weight=True,
            config={"scheme": "blackwell_macqueen", "mu_total": format_rational(mu)},
        )
    if name == "pitman_yor":
        alpha = _rational(params, "alpha")
        theta = _rational(params, "theta")
        check_pitman_yor(alpha, theta)
        return WeightScheme(
            "pitman_yor", partial(_cluster_size, -alpha), partial(_linear_new, theta, alpha),
            partial(_shifted_index, theta), {"alpha": alpha, "theta": theta},
            constant_new_weight=(alpha == 0),
            config={"scheme": "pitman_yor", "alpha": format_rational(alpha),
                    "theta": format_rational(theta)},
        )
    if name == "fisher":
        N = _integer(params, "N")
        theta = _rational(params, "theta")
        if N < 1:
            raise ParameterDomainError(f"N must be a positive integer, got {N}")
        if theta <= 0:
            raise ParameterDomainError(f"theta must be positive, got {theta}")
        return WeightScheme(
            "fisher", partial(_cluster_size, theta / N), partial(_fisher_new, theta, N),
            partial(_shifted_index, theta), {"N": N, "theta": theta}, max_clusters=N,
            config={"scheme": "fisher", "N": N, "theta": format_rational(theta)},
        )
    raise ParameterDomainError(f"unknown scheme {name!r}; expected one of {BUILTIN_SCHEMES}")


def check_pitman_yor(alpha, theta):
    if not 0 <= alpha < 1:
        raise ParameterDomainError(f"alpha must lie in [0, 1), got {alpha}")
    if theta <= -alpha:
        raise ParameterDomainError(f"theta must exceed -alpha, got theta={theta}, alpha={alpha}")


def custom_scheme(psi, psi0, xi, name="custom"):
    """A user-defined scheme.

    Each of ``psi``, ``psi0``, ``xi`` is either a callable on positive
    integers or a finite table whose first entry is the value at 1.  ``xi``
    is taken as given and checked against the weights, never inferred.
    """
    config = None
    if not any(callable(f) for f in (psi, psi0, xi)):
        config = {"scheme": "custom", "custom": {
            "psi": [format_rational(v) for v in psi],
            "psi0": [format_rational(v) for v in psi0],
            "xi": [format_rational(v) for v in xi],
        }}

    def wrap(f, label):
        if callable(f):
            return f
        return partial(_table, tuple(to_rational(v, label) for v in f), label)

    return WeightScheme(name, wrap(psi, "psi"), wrap(psi0, "psi0"), wrap(xi, "xi"), config=config)


def _rational(params, key):
    if params.get(key) is None:
        raise ParameterDomainError(f"missing parameter {key}")
    try:
        return to_rational(params[key], key)
    except ValueError as exc:
        raise ParameterDomainError(str(exc)) from exc


def _integer(params, key):
    value = params.get(key)
    if value is None:
        raise ParameterDomainError(f"missing parameter {key}")
    if isinstance(value, bool) or int(value) != value:
        raise ParameterDomainError(f"{key} must be an integer, got {value!r}")
    return int(value)


def predictive_weights(scheme, partition):
    """Weights of the prediction rule after observing ``partition``.

    For the empty partition the first draw comes from the base measure:
    ``(q0=1, q=(), total=1)``.  Otherwise raises :class:`ConditionViolation`
    unless ``q0 + sum(q) == xi(i)`` with all weights nonnegative.
    """
    return checked_weights(scheme, partition.block_sizes)


def checked_weights(scheme, block_sizes):
    key = ("checked", tuple(block_sizes))
    hit = scheme._cache.get(key)
    if hit is not None:
        return hit
    sizes = key[1]
    q0, q = scheme.raw_weights(sizes)
    if not sizes:
        hit = PredictiveWeights(q0, q, Fraction(1))
    else:
        i = sum(sizes)
        total = Fraction(scheme.xi(i))
        s = q0 + sum(q)
        if s != total:
            raise ConditionViolation(
                f"{scheme.name}: weights sum to {s} but xi({i}) = {total} "
                f"for block sizes {list(sizes)}"
            )
        if q0 < 0 or any(w < 0 for w in q):
            raise ConditionViolation(
                f"{scheme.name}: negative weight for block sizes {list(sizes)}")
        if total <= 0:
            raise ConditionViolation(f"{scheme.name}: xi({i}) = {total} is not positive")
        hit = PredictiveWeights(q0, q, total)
    scheme._cache[key] = hit
    return hit


@dataclass
class ValidationReport:
    scheme: str
    max_i: int
    passed: bool
    constant_sum: bool
    matches_xi: bool
    nonnegative: bool
    reachable: dict
    unreachable: int
    witness: Optional[dict] = None

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "max_i": self.max_i,
            "pass": self.passed,
            "constant_sum": self.constant_sum,
            "matches_xi": self.matches_xi,
            "nonnegative": self.nonnegative,
            "reachable_partitions": {str(k): v for k, v in sorted(self.reachable.items())},
            "unreachable_partitions": self.unreachable,
            "witness": self.witness,
        }


def validate_scheme(scheme, max_i):
    """Check the exchangeability condition on every reachable partition up to ``max_i``.

    Partitions are visited depth-first in restricted-growth order.  A
    partition the urn can never produce (some step along it has weight zero,
    e.g. more than N clusters under ``random_n``) is counted as unreachable
    and not checked.  Failures are reported, never raised.
    """
    if max_i < 1:
        raise ValueError("max_i must be a positive integer")
    first_sum = {}
    reachable = {}
    flags = {"constant_sum": True, "matches_xi": True, "nonnegative": True}
    witness = None

    def describe(assignment, sizes, s):
        return {"assignment": list(assignment), "block_sizes": list(sizes),
                "sum": format_rational(s)}

    # (assignment, sizes) stack; children pushed in reverse for lexicographic preorder
    stack = [((0,), (1,))]
    while stack:
        assignment, sizes = stack.pop()
        i = len(assignment)
        reachable[i] = reachable.get(i, 0) + 1
        q0, q = scheme.raw_weights(sizes)
        s = q0 + sum(q)
        try:
            xi = Fraction(scheme.xi(i))
        except ParameterDomainError:
            xi = None
        problems = []
        if i in first_sum and first_sum[i][0] != s:
            flags["constant_sum"] = False
            problems.append("sum_not_constant")
        else:
            first_sum.setdefault(i, (s, assignment, sizes))
        if xi is None or s != xi or xi <= 0:
            flags["matches_xi"] = False
            problems.append("sum_differs_from_xi")
        if q0 < 0 or any(w < 0 for w in q):
            flags["nonnegative"] = False
            problems.append("negative_weight")
        if problems and witness is None:
            witness = {"i": i, "reasons": problems,
                       "xi": format_rational(xi) if xi is not None else None,
                       "partition": describe(assignment, sizes, s)}
            if "sum_not_constant" in problems:
                s0, a0, z0 = first_sum[i]
                witness["other_partition"] = describe(a0, z0, s0)
        if i == max_i:
            continue
        children = []
        for j, w in enumerate(q):
            if w != 0:
                grown = sizes[:j] + (sizes[j] + 1,) + sizes[j + 1:]
                children.append((assignment + (j,), grown))
        if q0 != 0:
            children.append((assignment + (len(sizes),), sizes + (1,)))
        stack.extend(reversed(children))

    unreachable = sum(bell_number(i) for i in range(1, max_i + 1)) - sum(reachable.values())
    return ValidationReport(
        scheme.name, max_i, all(flags.values()), flags["constant_sum"], flags["matches_xi"],
        flags["nonnegative"], reachable, unreachable, witness,
    )


def scheme_from_config(doc):
    """Build a scheme from a parsed configuration document."""
    if not isinstance(doc, dict):
        raise ConfigError("scheme", "configuration must be a JSON object")
    name = doc.get("scheme")
    if name is None:
        raise ConfigError("scheme", "missing")
    if name == "custom":
        custom = doc.get("custom")
        if not isinstance(custom, dict):
            raise ConfigError("custom", "expected an object with psi, psi0, xi tables")
        tables = {}
        for key in ("psi", "psi0", "xi"):
            values = custom.get(key)
            if not isinstance(values, list) or not values:
                raise ConfigError(f"custom.{key}", "expected a nonempty list")
            try:
                tables[key] = [to_rational(v, f"custom.{key}") for v in values]
            except ValueError as exc:
                raise ConfigError(f"custom.{key}", str(exc)) from exc
        return custom_scheme(tables["psi"], tables["psi0"], tables["xi"])
    if name not in BUILTIN_SCHEMES:
        raise ConfigError("scheme", f"unknown scheme {name!r}")
    params = {k: doc[k] for k in ("alpha", "theta", "N", "mu_total") if k in doc}
    for key in ("alpha", "theta", "mu_total"):
        if key in params:
            try:
                params[key] = to_rational(params[key], key)
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from exc
    try:
        return make_builtin_scheme(name, **params)
    except ParameterDomainError as exc:
        msg = str(exc)
        bad = next((k for k in ("alpha", "theta", "N", "mu_total") if msg.startswith(k)
                    or f"parameter {k}" in msg), "scheme")
        raise ConfigError(bad, msg) from exc


def load_scheme_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("scheme-config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("scheme-config", f"invalid JSON in {path}: {exc}") from exc
    return scheme_from_config(doc)


def same_weights(a, b, max_i):
    """True if two schemes give identical predictive weights on all partitions up to ``max_i``."""
    for i in range(1, max_i + 1):
        for p in enumerate_label_sequences(i):
            if a.raw_weights(p.block_sizes) != b.raw_weights(p.block_sizes):
                return False
            if Fraction(a.xi(i)) != Fraction(b.xi(i)):
                return False
    return True


__all__ = [
    "BUILTIN_SCHEMES", "ConditionViolation", "ConfigError", "ParameterDomainError",
    "Partition", "PredictiveWeights", "ValidationReport", "WeightScheme", "checked_weights",
    "custom_scheme",
    "load_scheme_config", "make_builtin_scheme", "predictive_weights", "same_weights",
    "scheme_from_config", "validate_scheme",
]
