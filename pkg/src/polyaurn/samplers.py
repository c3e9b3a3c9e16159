"""Monte Carlo samplers: urn paths and the limiting random measures.

Sampling is done in floating point.  Every replicate draws from its own
stream, derived from ``(seed, stream)`` with :class:`numpy.random.SeedSequence`,
so output does not depend on how replicates are spread over workers.

Gamma variates use the boosting identity ``Gamma(a) = Gamma(a + 1) * U**(1/a)``
evaluated in log space, which stays valid and underflow-free for the small
shapes (``theta/N``, ``1 - alpha``) that come up routinely.
"""

import math
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import accumulate
from typing import Optional

import numpy as np

from .exact import AtomicBase
from .schemes import ConditionViolation, check_pitman_yor

DEFAULT_TRUNC_EPS = 1e-12
DEFAULT_K_MAX = 10_000
FIRST_BLOCK = 32
MAX_RESAMPLES = 8


@dataclass(frozen=True)
class RngStreamSpec:
    """Names one reproducible random stream: a 64-bit seed plus a stream index."""

    seed: int
    stream: int = 0
    sub: tuple = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream < 0:
            raise ValueError(f"stream must be nonnegative, got {self.stream}")

    def child(self, k):
        return replace(self, sub=self.sub + (k,))

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.sub))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SamplePath:
    labels: tuple
    values: Optional[tuple] = None
    replicate_id: int = 0
    seed_info: tuple = (0, 0)

    @property
    def n_blocks(self):
        return max(self.labels) + 1 if self.labels else 0

    @property
    def block_sizes(self):
        sizes = [0] * self.n_blocks
        for label in self.labels:
            sizes[label] += 1
        return tuple(sizes)

    def to_record(self):
        rec = {"replicate": self.replicate_id, "labels": list(self.labels)}
        if self.values is not None:
            rec["values"] = list(self.values)
        rec["n_blocks"] = self.n_blocks
        return rec


@dataclass
class DiscreteMeasure:
    """Atoms ``(locations[k], weights[k])`` plus unassigned ``residual`` mass.

    The residual stands for the untruncated tail; draws landing there are
    treated as fresh values never seen before.
    """

    locations: np.ndarray
    weights: np.ndarray
    residual: float = 0.0
    status: str = "ok"

    @property
    def atoms(self):
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    def total_mass(self):
        return float(math.fsum(self.weights)) + self.residual


class _FloatRule:
    """Float copies of a scheme's weights, memoized by argument."""

    def __init__(self, scheme):
        self.scheme = scheme
        self._psi, self._psi0, self._xi = {}, {}, {}

    def psi(self, e):
        v = self._psi.get(e)
        if v is None:
            v = self._psi[e] = float(self.scheme.psi(e))
        return v

    def psi0(self, n):
        v = self._psi0.get(n)
        if v is None:
            v = self._psi0[n] = float(self.scheme.psi0(n))
        return v

    def xi(self, i):
        v = self._xi.get(i)
        if v is None:
            v = self._xi[i] = float(self.scheme.xi(i))
        return v


def _float_rule(scheme):
    rule = scheme._cache.get("float_rule")
    if rule is None:
        rule = scheme._cache["float_rule"] = _FloatRule(scheme)
    return rule


def _atom_cdf(base):
    cdf = list(accumulate(float(w) for w in base.weights))
    cdf[-1] = 1.0
    return cdf


def sample_urn_path(scheme, n, base=None, rng=RngStreamSpec(0), replicate_id=None):
    """Run the prediction rule for ``n`` draws.

    ``base`` is ``None`` for the continuous base (Uniform[0, 1], so fresh
    draws are almost surely new) or an :class:`AtomicBase`, in which case
    a fresh draw landing on an observed atom joins that atom's cluster and
    ``values`` holds 1-based atom indices.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    gen = rng.generator()
    rule = _float_rule(scheme)
    cdf = _atom_cdf(base) if isinstance(base, AtomicBase) else None
    labels, values, sizes, cluster_values = [], [], [], []
    cluster_of_atom = {}
    for i in range(n):
        if i == 0:
            choice = 0
        else:
            q0 = rule.psi0(len(sizes))
            ws = [rule.psi(e) for e in sizes]
            total = q0 + math.fsum(ws)
            xi = rule.xi(i)
            if abs(total - xi) > 1e-9 * max(1.0, abs(xi)) or q0 < 0 or min(ws) < 0:
                raise ConditionViolation(
                    f"{scheme.name}: weights {q0}, {ws} do not sum to xi({i}) = {xi}"
                )
            u = gen.random() * total
            if u < q0:
                choice = len(sizes)
            else:
                u -= q0
                choice = len(sizes) - 1
                for j, w in enumerate(ws):
                    if u < w:
                        choice = j
                        break
                    u -= w
                # Float round-off can leave u just past the last cluster; never
                # let it land on a zero-weight cluster.
                while ws[choice] == 0 and choice > 0:
                    choice -= 1
        if choice == len(sizes):
            if cdf is None:
                value = gen.random()
            else:
                value = bisect_right(cdf, gen.random()) + 1
                value = min(value, len(cdf))
                existing = cluster_of_atom.get(value)
                if existing is not None:
                    sizes[existing] += 1
                    labels.append(existing)
                    values.append(value)
                    continue
                cluster_of_atom[value] = len(sizes)
            sizes.append(1)
            cluster_values.append(value)
        else:
            sizes[choice] += 1
        labels.append(choice)
        values.append(cluster_values[choice])
    rid = rng.stream if replicate_id is None else replicate_id
    return SamplePath(tuple(labels), tuple(values), rid, (rng.seed, rng.stream))


def _log_gamma(gen, shape):
    """log of Gamma(shape, 1) variates, elementwise over ``shape``."""
    shape = np.asarray(shape, dtype=float)
    g = gen.standard_gamma(shape + 1.0)
    u = 1.0 - gen.random(shape.shape)  # in (0, 1]
    return np.log(g) + np.log(u) / shape


class _StickStream:
    """Generates stick-breaking weights in blocks of doubling size.

    The block layout is fixed, so consuming all blocks and stopping early
    produce identical prefixes from the same stream.
    """

    def __init__(self, alpha, theta, trunc_eps, k_max, gen):
        self.alpha, self.theta = float(alpha), float(theta)
        self.log_eps = math.log(trunc_eps)
        self.k_max = k_max
        self.gen = gen
        self.k = 0
        self.block = FIRST_BLOCK
        self.log_rest = 0.0
        self.done = False
        self.status = "ok"

    def next_block(self):
        m = min(self.block, self.k_max - self.k)
        self.block *= 2
        ks = np.arange(self.k + 1, self.k + m + 1, dtype=float)
        log_a = _log_gamma(self.gen, np.full(m, 1.0 - self.alpha))
        log_b = _log_gamma(self.gen, self.theta + ks * self.alpha)
        locations = self.gen.random(m)
        lse = np.logaddexp(log_a, log_b)
        log_v, log_1mv = log_a - lse, log_b - lse
        log_rest = self.log_rest + np.cumsum(log_1mv)
        log_before = np.concatenate(([self.log_rest], log_rest[:-1]))
        weights = np.exp(log_before + log_v)
        below = np.flatnonzero(log_rest < self.log_eps)
        if below.size:
            cut = int(below[0]) + 1
            weights, locations, log_rest = weights[:cut], locations[:cut], log_rest[:cut]
            self.done = True
        self.k += weights.size
        self.log_rest = float(log_rest[-1])
        if not self.done and self.k >= self.k_max:
            self.done = True
            self.status = "k_max_reached"
        return locations, weights


def _check_stick_args(alpha, theta, trunc_eps, k_max):
    check_pitman_yor(Fraction(alpha), Fraction(theta))
    if not trunc_eps > 0:
        raise ValueError("trunc_eps must be positive")
    if k_max < 1:
        raise ValueError("k_max must be a positive integer")


def sample_stick_breaking(alpha, theta, trunc_eps=DEFAULT_TRUNC_EPS, k_max=DEFAULT_K_MAX,
                          rng=RngStreamSpec(0)):
    """Truncated stick-breaking draw with V_k ~ Beta(1 - alpha, theta + k alpha).

    Stops once the unbroken stick is below ``trunc_eps`` or after ``k_max``
    sticks; in the latter case ``status`` is ``"k_max_reached"`` and the
    leftover stick is returned as ``residual``.
    """
    _check_stick_args(alpha, theta, trunc_eps, k_max)
    stream = _StickStream(alpha, theta, trunc_eps, k_max, rng.generator())
    locs, ws = [], []
    while not stream.done:
        loc, w = stream.next_block()
        locs.append(loc)
        ws.append(w)
    return DiscreteMeasure(np.concatenate(locs), np.concatenate(ws),
                           math.exp(stream.log_rest), stream.status)


def sample_finite_dirichlet(N, theta, rng=RngStreamSpec(0)):
    """Normalized i.i.d. Gamma(theta/N) weights on N uniform locations."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not Fraction(theta) > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    gen = rng.generator()
    shape = float(Fraction(theta) / int(N))
    for _ in range(MAX_RESAMPLES):
        log_g = _log_gamma(gen, np.full(int(N), shape))
        locations = gen.random(int(N))
        scaled = np.exp(log_g - log_g.max())
        total = scaled.sum()
        # log-space scaling keeps total >= 1; the retry only guards against non-finite draws
        if np.isfinite(total) and total > 0:
            return DiscreteMeasure(locations, scaled / total, 0.0)
    raise FloatingPointError(f"no finite Gamma({shape}) draw after {MAX_RESAMPLES} attempts")


def _draw_from_measure(measure, u, gen):
    """Inverse-CDF draws for uniforms ``u``; canonical labels by atom identity."""
    cum = np.cumsum(measure.weights)
    idx = np.searchsorted(cum, u, side="right")
    k = measure.weights.size
    if measure.residual == 0.0:
        idx = np.minimum(idx, k - 1)
    seen, labels, values = {}, [], []
    for pos, atom in enumerate(idx.tolist()):
        if atom >= k:
            key, value = ("fresh", pos), float(gen.random())
        else:
            key, value = atom, float(measure.locations[atom])
        if key not in seen:
            seen[key] = len(seen)
        labels.append(seen[key])
        values.append(value)
    return tuple(labels), tuple(values)


def sample_iid_from_measure(measure, n, rng=RngStreamSpec(0), replicate_id=None):
    """Draw ``n`` values i.i.d. from ``measure``; residual mass yields fresh values."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not measure.residual < 1:
        raise ValueError("measure has no atom mass to draw from")
    gen = rng.generator()
    u = gen.random(n)
    labels, values = _draw_from_measure(measure, u, gen)
    rid = rng.stream if replicate_id is None else replicate_id
    return SamplePath(labels, values, rid, (rng.seed, rng.stream))


def stick_breaking_path(alpha, theta, n, trunc_eps=DEFAULT_TRUNC_EPS, k_max=DEFAULT_K_MAX,
                        rng=RngStreamSpec(0)):
    """``n`` i.i.d. draws from one stick-breaking measure, generating only the sticks needed.

    Identical to ``sample_iid_from_measure(sample_stick_breaking(..., rng.child(0)),
    n, rng.child(1))`` but stops breaking sticks once every draw is covered.
    """
    _check_stick_args(alpha, theta, trunc_eps, k_max)
    stream = _StickStream(alpha, theta, trunc_eps, k_max, rng.child(0).generator())
    gen = rng.child(1).generator()
    u = gen.random(n)
    top = float(u.max())
    locs, ws = [], []
    covered = 0.0
    while not stream.done:
        loc, w = stream.next_block()
        locs.append(loc)
        ws.append(w)
        covered = float(np.cumsum(np.concatenate(ws))[-1])
        if covered > top:
            break
    measure = DiscreteMeasure(np.concatenate(locs), np.concatenate(ws),
                              math.exp(stream.log_rest), stream.status)
    labels, values = _draw_from_measure(measure, u, gen)
    return SamplePath(labels, values, rng.stream, (rng.seed, rng.stream))


def finite_dirichlet_path(N, theta, n, rng=RngStreamSpec(0)):
    measure = sample_finite_dirichlet(N, theta, rng.child(0))
    path = sample_iid_from_measure(measure, n, rng.child(1))
    return replace(path, replicate_id=rng.stream, seed_info=(rng.seed, rng.stream))


def _urn_chunk(scheme, n, base, seed, start, stop):
    return [sample_urn_path(scheme, n, base, RngStreamSpec(seed, r)) for r in range(start, stop)]


def _stick_chunk(alpha, theta, n, trunc_eps, k_max, seed, start, stop):
    return [stick_breaking_path(alpha, theta, n, trunc_eps, k_max, RngStreamSpec(seed, r))
            for r in range(start, stop)]


def _fisher_chunk(N, theta, n, seed, start, stop):
    return [finite_dirichlet_path(N, theta, n, RngStreamSpec(seed, r)) for r in range(start, stop)]


def _run_chunks(fn, args, replicates, workers):
    if workers <= 1 or replicates < 2:
        return fn(*args, 0, replicates)
    n_chunks = min(replicates, workers * 4)
    bounds = [replicates * k // n_chunks for k in range(n_chunks + 1)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, lo, hi) for lo, hi in zip(bounds, bounds[1:])]
        out = []
        for f in futures:
            out.extend(f.result())
    return out


def sample_urn_paths(scheme, n, replicates, base=None, seed=0, workers=1):
    """``replicates`` urn paths; replicate ``r`` uses stream ``(seed, r)``."""
    return _run_chunks(_urn_chunk, (scheme, n, base, seed), replicates, workers)


def sample_stick_paths(alpha, theta, n, replicates, trunc_eps=DEFAULT_TRUNC_EPS,
                       k_max=DEFAULT_K_MAX, seed=0, workers=1):
    return _run_chunks(_stick_chunk, (alpha, theta, n, trunc_eps, k_max, seed), replicates, workers)


def sample_fisher_paths(N, theta, n, replicates, seed=0, workers=1):
    return _run_chunks(_fisher_chunk, (N, theta, n, seed), replicates, workers)
