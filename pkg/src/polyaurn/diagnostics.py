"""Finite-sample diagnostics comparing samplers with exact laws."""

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from scipy import stats

from .exact import partition_table
from .partitions import canonicalize_labels
from .rational import render
from .samplers import sample_urn_paths
from .schemes import make_builtin_scheme

EXACT_TRACE_MAX_I = 200
FISHER_DP_MAX_I = 8
POOL_THRESHOLD = 5


def metric(name, value, exact, threshold=None, passed=None, **extra):
    """One diagnostic record: ``{metric, value, exact, threshold?, pass?}``."""
    rec = {"metric": name, "value": render(value) if isinstance(value, Fraction) else value,
           "exact": exact}
    if threshold is not None:
        rec["threshold"] = threshold
    if passed is not None:
        rec["pass"] = bool(passed)
    rec.update(extra)
    return rec


@dataclass
class PartitionDistribution:
    """A law over the partitions of {1, ..., i}, exact (Fractions) or empirical."""

    support: list
    probabilities: list
    total_count: Optional[int] = None

    @property
    def exact(self):
        return self.total_count is None

    @property
    def i(self):
        return len(self.support[0]) if self.support else 0

    @classmethod
    def from_table(cls, table):
        support = sorted(table)
        return cls(support, [table[a] for a in support])

    @classmethod
    def exact_for(cls, scheme, i):
        return cls.from_table(partition_table(scheme, i))

    @classmethod
    def from_samples(cls, label_sequences):
        counts = Counter(canonicalize_labels(labels).assignment for labels in label_sequences)
        total = sum(counts.values())
        support = sorted(counts)
        return cls(support, [counts[a] / total for a in support], total)

    def as_dict(self):
        return dict(zip(self.support, self.probabilities))


def _chi_square(exact, empirical):
    probs = exact.as_dict()
    observed = {a: round(p * empirical.total_count) for a, p in empirical.as_dict().items()}
    cells = [(float(probs.get(a, 0)) * empirical.total_count, observed.get(a, 0))
             for a in set(probs) | set(observed)]
    cells.sort()
    pooled_e = pooled_o = 0.0
    kept = []
    for e, o in cells:
        if e < POOL_THRESHOLD:
            pooled_e += e
            pooled_o += o
        else:
            kept.append((e, o))
    if pooled_e > 0 or pooled_o > 0:
        if 0 < pooled_e < POOL_THRESHOLD and kept:
            e, o = kept.pop(0)
            pooled_e += e
            pooled_o += o
        kept.append((pooled_e, pooled_o))
    if any(e == 0 and o > 0 for e, o in kept):
        return {"statistic": float("inf"), "df": len(kept) - 1, "p_value": 0.0, "cells": len(kept)}
    stat = sum((o - e) ** 2 / e for e, o in kept if e > 0)
    df = len(kept) - 1
    p = float(stats.chi2.sf(stat, df)) if df > 0 else 1.0
    return {"statistic": stat, "df": df, "p_value": p, "cells": len(kept)}


def compare_partition_distributions(a, b, top=5):
    """Total variation distance, chi-square (when one side is exact), and worst cells.

    TV is exact when both sides are exact.  Partitions missing from one side
    count as probability zero there.
    """
    if a.support and b.support and a.i != b.i:
        raise ValueError(f"distributions are over different sizes: {a.i} vs {b.i}")
    pa, pb = a.as_dict(), b.as_dict()
    keys = sorted(set(pa) | set(pb))
    both_exact = a.exact and b.exact
    zero = Fraction(0) if both_exact else 0.0
    diffs = []
    for k in keys:
        x, y = pa.get(k, zero), pb.get(k, zero)
        if not both_exact:
            x, y = float(x), float(y)
        diffs.append((k, x, y, abs(x - y)))
    tv = sum((d for *_, d in diffs), zero) / 2
    report = {
        "i": a.i or b.i,
        "tv": render(tv) if both_exact else tv,
        "exact": both_exact,
    }
    if a.exact != b.exact:
        exact, empirical = (a, b) if a.exact else (b, a)
        report["chi_square"] = _chi_square(exact, empirical)
    worst = sorted(diffs, key=lambda t: t[3], reverse=True)[:top]
    report["largest_discrepancies"] = [
        {"partition": list(k), "a": float(x), "b": float(y), "abs_diff": float(d)}
        for k, x, y, d in worst
    ]
    return report


def tv_distance(a, b):
    pa, pb = a.as_dict(), b.as_dict()
    keys = set(pa) | set(pb)
    return sum(abs(pa.get(k, 0) - pb.get(k, 0)) for k in keys) / 2


@dataclass
class NewValueTrace:
    """``a[i]`` is the probability that draw ``i + 1`` is a new value."""

    a: list
    mode: str

    def to_dict(self):
        values = [render(x) if isinstance(x, Fraction) else x for x in self.a]
        return {"mode": self.mode, "a": values}


def path_new_value_trace(scheme, labels):
    """Along one path: ``psi0(n_i) / xi(i)`` after each prefix, with ``a[0] = 1``."""
    out = [1.0]
    n = 0
    for i, label in enumerate(labels[:-1], start=1):
        n = max(n, label + 1)
        out.append(float(Fraction(scheme.psi0(n)) / Fraction(scheme.xi(i))))
    return out


def new_value_probability_trace(scheme, i_max, mode="exact", rng=None, replicates=1000,
                                workers=1):
    """E[a_i] for i = 0..i_max.

    Exact mode uses the closed form ``q0/xi(i)`` when the new-value weight
    does not depend on the partition, and otherwise propagates the exact law
    of the cluster count (a Markov chain under the exchangeability
    condition).  Empirical mode averages along sampled urn paths.
    """
    if mode == "exact":
        if scheme.constant_new_weight:
            q0 = Fraction(scheme.psi0(1))
            return NewValueTrace(
                [Fraction(1)] + [q0 / Fraction(scheme.xi(i)) for i in range(1, i_max + 1)],
                "exact")
        if i_max > EXACT_TRACE_MAX_I:
            raise ValueError(f"exact trace for a partition-dependent scheme is capped at "
                             f"i_max={EXACT_TRACE_MAX_I}")
        dist = {1: Fraction(1)}
        a = [Fraction(1)]
        for i in range(1, i_max + 1):
            xi = Fraction(scheme.xi(i))
            step = {n: Fraction(scheme.psi0(n)) / xi for n in dist}
            a.append(sum((p * step[n] for n, p in dist.items()), Fraction(0)))
            nxt = {}
            for n, p in dist.items():
                if step[n]:
                    nxt[n + 1] = nxt.get(n + 1, 0) + p * step[n]
                if step[n] != 1:
                    nxt[n] = nxt.get(n, 0) + p * (1 - step[n])
            dist = nxt
        return NewValueTrace(a, "exact")
    if mode == "empirical":
        if rng is None:
            raise ValueError("empirical mode needs an RngStreamSpec")
        paths = sample_urn_paths(scheme, i_max + 1, replicates, seed=rng.seed, workers=workers)
        totals = [0.0] * (i_max + 1)
        for p in paths:
            for i, x in enumerate(path_new_value_trace(scheme, p.labels)):
                totals[i] += x
        return NewValueTrace([t / replicates for t in totals], "empirical")
    raise ValueError(f"mode must be 'exact' or 'empirical', got {mode!r}")


def fisher_dp_eppf_distance(N, theta, i):
    """Exact TV between the Fisher(N, theta) and Dirichlet(theta) partition laws at size i."""
    if i > FISHER_DP_MAX_I:
        raise ValueError(f"i={i} exceeds the enumeration guard of {FISHER_DP_MAX_I}")
    fisher = partition_table(make_builtin_scheme("fisher", N=N, theta=theta), i)
    dp = partition_table(make_builtin_scheme("blackwell_macqueen", mu_total=theta), i)
    return sum((abs(fisher[k] - dp[k]) for k in fisher), Fraction(0)) / 2


def predictive_measure(scheme, labels, i):
    """Normalized prediction rule after the first ``i`` labels: ``(new_mass, cluster_weights)``."""
    sizes = [0] * (max(labels[:i]) + 1 if i else 0)
    for label in labels[:i]:
        sizes[label] += 1
    q0, q = scheme.raw_weights(tuple(sizes))
    total = Fraction(scheme.xi(i)) if i else Fraction(1)
    return q0 / total, [w / total for w in q]


def predictive_convergence_trace(path, scheme, checkpoints):
    """TV distances between the prediction rules at consecutive checkpoints.

    Atoms are the observed clusters plus the base-measure component; a
    cluster not yet observed at the earlier checkpoint has weight zero there.
    Purely descriptive: no rate is asserted.
    """
    checkpoints = list(checkpoints)
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and checkpoints[-1] > len(path.labels):
        raise ValueError("checkpoint beyond the end of the path")
    measures = [predictive_measure(scheme, path.labels, i) for i in checkpoints]
    out = []
    for (a0, w0), (a1, w1) in zip(measures, measures[1:]):
        d = abs(a1 - a0)
        for j, w in enumerate(w1):
            d += abs(w - (w0[j] if j < len(w0) else 0))
        out.append(float(d / 2))
    return out


def independence_smoke_test(scheme, n=100, replicates=10_000, seed=0, threshold=0.05, workers=1):
    """Heuristic: rank correlation between the first cluster's value and its frequency.

    The first distinct value should be independent of its limiting weight.
    There is no quantitative target behind the threshold; treat the result
    as a smoke test.
    """
    paths = sample_urn_paths(scheme, n, replicates, seed=seed, workers=workers)
    first_value = [p.values[0] for p in paths]
    first_share = [p.block_sizes[0] / n for p in paths]
    rho = float(stats.spearmanr(first_value, first_share).statistic)
    return metric("spearman_first_value_vs_share", rho, False, threshold, abs(rho) < threshold,
                  heuristic=True)


def sampler_agreement(scheme, i, paths):
    """Compare sampled partitions of size ``i`` with the scheme's exact table."""
    exact = PartitionDistribution.exact_for(scheme, i)
    empirical = PartitionDistribution.from_samples(p.labels[:i] for p in paths)
    return compare_partition_distributions(exact, empirical)


__all__ = [
    "NewValueTrace", "PartitionDistribution", "compare_partition_distributions",
    "fisher_dp_eppf_distance", "independence_smoke_test", "metric", "new_value_probability_trace",
    "path_new_value_trace", "predictive_convergence_trace", "predictive_measure",
    "sampler_agreement", "tv_distance",
]
