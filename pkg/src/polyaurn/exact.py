"""Exact rational laws of urn sequences.

Non-atomic base measures are integrated out, so a sequence is represented by
the partition it induces.  The atomic-base engine instead tracks observed
atom values, which is where exchangeability can fail.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Optional

from .partitions import Partition, canonicalize_labels, enumerate_label_sequences
from .rational import format_rational, render, to_rational
from .schemes import (
    ConditionViolation,
    PredictiveWeights,
    check_pitman_yor,
    checked_weights,
    make_builtin_scheme,
)

EXCHANGEABILITY_MAX_I = 8
CLUSTER_COUNT_MAX_I = 10


def rising_factorial(a, i):
    """a (a+1) ... (a+i-1), with a^[0] = 1."""
    out = Fraction(1)
    a = Fraction(a)
    for k in range(i):
        out *= a + k
    return out


def _as_partition(partition):
    if isinstance(partition, Partition):
        return partition
    return canonicalize_labels(partition)


def _step_weights(scheme, sizes, strict):
    if strict:
        return checked_weights(scheme, sizes)
    # Run the urn as written, normalizing by whatever the weights sum to.
    q0, q = scheme.raw_weights(sizes)
    total = q0 + sum(q)
    if q0 < 0 or any(w < 0 for w in q):
        raise ConditionViolation(f"{scheme.name}: negative weight for block sizes {list(sizes)}")
    if total <= 0:
        raise ConditionViolation(f"{scheme.name}: all weights vanish for block sizes {list(sizes)}")
    return PredictiveWeights(q0, q, total)


def sequence_probability(scheme, partition, strict=True):
    """Probability that the urn produces exactly this clustering, step by step.

    Multiplies the normalized predictive weight of the choice made at each
    step.  Returns 0 as soon as a step has zero weight, without evaluating
    the (unreachable) states after it.  With ``strict=False`` the weights
    are normalized by their actual sum instead of being checked against
    ``xi``, which is how an urn violating the condition actually behaves.
    """
    p = _as_partition(partition)
    prob = Fraction(1)
    sizes = []
    for label in p.assignment:
        w = _step_weights(scheme, sizes, strict)
        if label == len(sizes):
            step = w.q0
            sizes.append(1)
        else:
            step = w.q[label]
            sizes[label] += 1
        if step == 0:
            return Fraction(0)
        prob *= step / w.total
    return prob


def eppf(scheme, partition):
    """Closed-form partition probability.

    ``prod_{k<n} psi0(k) * prod_j psi(1)...psi(e_j - 1) / (xi(1)...xi(i-1))``.
    The weights along the partition's own path are still checked against
    ``xi`` so that schemes violating the condition raise rather than return
    a meaningless number.
    """
    p = _as_partition(partition)
    sizes = p.block_sizes
    i, n = p.size, p.n_blocks
    _check_path(scheme, p)
    num = Fraction(1)
    for k in range(1, n):
        num *= Fraction(scheme.psi0(k))
    for e in sizes:
        for m in range(1, e):
            num *= Fraction(scheme.psi(m))
    if num == 0:
        return Fraction(0)
    den = Fraction(1)
    for k in range(1, i):
        den *= Fraction(scheme.xi(k))
    return num / den


def _check_path(scheme, p):
    sizes = []
    for label in p.assignment:
        w = checked_weights(scheme, sizes)
        if label == len(sizes):
            if w.q0 == 0:
                return
            sizes.append(1)
        else:
            if w.q[label] == 0:
                return
            sizes[label] += 1


def dirichlet_process_eppf(mu_total, partition):
    """The Dirichlet-process joint law: mu^n / mu^[i] * prod (e_j - 1)!."""
    p = _as_partition(partition)
    mu = Fraction(mu_total)
    out = mu ** p.n_blocks / rising_factorial(mu, p.size)
    for e in p.block_sizes:
        out *= factorial(e - 1)
    return out


def partition_table(scheme, i, strict=True):
    """Map every restricted-growth string of length ``i`` to its exact probability."""
    return {
        p.assignment: sequence_probability(scheme, p, strict)
        for p in enumerate_label_sequences(i)
    }


@dataclass
class ExchangeabilityReport:
    scheme: str
    max_i: int
    passed: bool
    sequences_checked: int
    comparisons: int
    witness: Optional[dict] = None

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "max_i": self.max_i,
            "pass": self.passed,
            "sequences_checked": self.sequences_checked,
            "comparisons": self.comparisons,
            "witness": self.witness,
        }


def _check_size(scheme, i):
    """Compare each partition of size ``i`` with every permutation of its positions."""
    probs = partition_table(scheme, i, strict=False)
    visited = set()
    comparisons = 0
    for a, pa in probs.items():
        if a in visited:
            continue
        visited.add(a)
        compared = {a}
        for sigma in itertools.permutations(range(i)):
            b = canonicalize_labels([a[s] for s in sigma]).assignment
            if b in compared:
                continue
            compared.add(b)
            visited.add(b)
            comparisons += 1
            if probs[b] != pa:
                witness = {
                    "i": i,
                    "sequence": list(a),
                    "permutation": list(sigma),
                    "permuted_sequence": list(b),
                    "p_sequence": format_rational(pa),
                    "p_permuted": format_rational(probs[b]),
                }
                return len(probs), comparisons, witness
    return len(probs), comparisons, None


def exchangeability_check(scheme, max_i, workers=1, limit=EXCHANGEABILITY_MAX_I):
    """Brute-force permutation invariance of the partition law up to ``max_i``.

    Each permutation orbit is visited once: its first partition is permuted
    in every possible way and each distinct canonical result is compared
    with it exactly.  Stops at the first size that yields a witness.  The
    urn is run with its weights normalized by their actual sum, so schemes
    that violate the condition are checked too rather than rejected.
    """
    if max_i < 1:
        raise ValueError("max_i must be a positive integer")
    if limit is not None and max_i > limit:
        raise ValueError(f"max_i={max_i} exceeds the guard of {limit}")
    sizes = range(1, max_i + 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_check_size, itertools.repeat(scheme), sizes))
    else:
        results = []
        for i in sizes:
            results.append(_check_size(scheme, i))
            if results[-1][2] is not None:
                break
    checked = comparisons = 0
    witness = None
    for count, comp, w in results:
        checked += count
        comparisons += comp
        if w is not None:
            witness = w
            break
    return ExchangeabilityReport(scheme.name, max_i, witness is None, checked, comparisons, witness)


@dataclass(frozen=True)
class AtomicBase:
    """A base measure on atoms 1..r with exact weights summing to one."""

    weights: tuple

    def __post_init__(self):
        w = tuple(to_rational(x, "weights") for x in self.weights)
        if not w:
            raise ValueError("an atomic base needs at least one atom")
        if any(x <= 0 for x in w):
            raise ValueError("atom weights must be positive")
        if sum(w) != 1:
            raise ValueError(f"atom weights sum to {sum(w)}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, r):
        return cls(tuple(Fraction(1, r) for _ in range(r)))

    @property
    def r(self):
        return len(self.weights)


def atomic_sequence_probability(scheme, base, values):
    """Probability of observing atom indices ``values`` (1-based) under an atomic base.

    A fresh draw from the base that lands on an already observed atom joins
    that atom's cluster, so clusters are identified by value.
    """
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    for x in values:
        if not 1 <= x <= base.r:
            raise ValueError(f"atom index {x} out of range 1..{base.r}")
    cluster_of = {}
    sizes = []
    prob = Fraction(1)
    for x in values:
        w = checked_weights(scheme, sizes)
        step = w.q0 * base.weights[x - 1]
        j = cluster_of.get(x)
        if j is None:
            cluster_of[x] = len(sizes)
            sizes.append(1)
        else:
            step += w.q[j]
            sizes[j] += 1
        if step == 0:
            return Fraction(0)
        prob *= step / w.total
    return prob


def counterexample_closed_forms(r, theta, alpha):
    """Hand-derived P{1,2,1} and P{1,1,2} for the two-parameter urn on r uniform atoms."""
    r, theta, alpha = Fraction(r), Fraction(theta), Fraction(alpha)
    den = r ** 2 * (theta + 1) * (theta + 2)
    p121 = (theta + alpha) * ((theta + 2 * alpha) / r + 1 - alpha) / den
    p112 = ((theta + alpha) / r + 1 - alpha) * (theta + alpha) / den
    return p121, p112


def counterexample_report(r, theta, alpha):
    """Show that the two-parameter urn on a uniform atomic base is not exchangeable.

    Computes P{X=(1,2,1)} and P{X=(1,1,2)} with the atomic engine and with
    the closed forms; the two routes must agree exactly.
    """
    theta = to_rational(theta, "theta")
    alpha = to_rational(alpha, "alpha")
    if int(r) != r or r < 2:
        raise ValueError(f"r must be an integer >= 2, got {r}")
    check_pitman_yor(alpha, theta)
    scheme = make_builtin_scheme("pitman_yor", alpha=alpha, theta=theta)
    base = AtomicBase.uniform(int(r))
    p121 = atomic_sequence_probability(scheme, base, [1, 2, 1])
    p112 = atomic_sequence_probability(scheme, base, [1, 1, 2])
    c121, c112 = counterexample_closed_forms(r, theta, alpha)
    agree = (p121 == c121) and (p112 == c112)
    if not agree:
        raise ConditionViolation(
            f"atomic engine ({p121}, {p112}) disagrees with closed form ({c121}, {c112})"
        )
    return {
        "r": int(r),
        "theta": format_rational(theta),
        "alpha": format_rational(alpha),
        "p_1_2_1": render(p121),
        "p_1_1_2": render(p112),
        "routes_agree": agree,
        "equal": p121 == p112,
    }


def expected_cluster_count_exact(scheme, i, limit=CLUSTER_COUNT_MAX_I):
    """E[number of clusters after i draws], summed over all partitions."""
    if i < 1:
        raise ValueError("i must be a positive integer")
    if limit is not None and i > limit:
        raise ValueError(f"i={i} exceeds the enumeration guard of {limit}")
    return sum(
        (p.n_blocks * sequence_probability(scheme, p) for p in enumerate_label_sequences(i, limit=None)),
        Fraction(0),
    )


def cluster_count_distribution(scheme, i):
    """Exact law of the number of clusters after ``i`` draws.

    Under the exchangeability condition the chance of a new cluster,
    ``psi0(n) / xi(k)``, depends only on the current count ``n``, so the count
    is a Markov chain and no enumeration over partitions is needed.
    """
    dist = {1: Fraction(1)}
    for k in range(1, i):
        xi = Fraction(scheme.xi(k))
        nxt = {}
        for n, p in dist.items():
            a = Fraction(scheme.psi0(n)) / xi
            if a:
                nxt[n + 1] = nxt.get(n + 1, 0) + p * a
            if a != 1:
                nxt[n] = nxt.get(n, 0) + p * (1 - a)
        dist = nxt
    return dict(sorted(dist.items()))

