import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from polyaurn.exact import AtomicBase, atomic_sequence_probability, partition_table
from polyaurn.partitions import is_restricted_growth
from polyaurn.samplers import (
    DiscreteMeasure,
    RngStreamSpec,
    _log_gamma,
    finite_dirichlet_path,
    sample_finite_dirichlet,
    sample_fisher_paths,
    sample_iid_from_measure,
    sample_stick_breaking,
    sample_urn_path,
    sample_urn_paths,
    stick_breaking_path,
)
from polyaurn.schemes import ConditionViolation, custom_scheme, make_builtin_scheme


def within_se(samples, mean, k=3):
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - mean) <= k * se


def tv(table, paths, i):
    counts = Counter(p.labels[:i] for p in paths)
    total = len(paths)
    keys = set(table) | set(counts)
    return 0.5 * sum(abs(float(table.get(k, 0)) - counts.get(k, 0) / total) for k in keys)


def test_rng_stream_spec():
    a = RngStreamSpec(42, 3).generator().random(4)
    b = RngStreamSpec(42, 3).generator().random(4)
    c = RngStreamSpec(42, 4).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(RngStreamSpec(42, 3).child(0).generator().random(4), a)
    with pytest.raises(ValueError):
        RngStreamSpec(-1)
    with pytest.raises(ValueError):
        RngStreamSpec(2 ** 64)


def test_random_n_one_stays_in_one_cluster():
    s = make_builtin_scheme("random_n", N=1)
    for seed in range(5):
        path = sample_urn_path(s, 10, rng=RngStreamSpec(seed))
        assert path.labels == (0,) * 10
        assert len(set(path.values)) == 1


def test_iid_always_new():
    path = sample_urn_path(make_builtin_scheme("iid"), 10, rng=RngStreamSpec(7))
    assert path.labels == tuple(range(10))
    assert len(set(path.values)) == 10


def test_path_values_consistent_with_labels(py_half):
    for r in range(50):
        p = sample_urn_path(py_half, 30, rng=RngStreamSpec(1, r))
        assert is_restricted_growth(p.labels)
        first = {}
        for label, v in zip(p.labels, p.values):
            assert first.setdefault(label, v) == v
        assert len(set(p.values)) == p.n_blocks
        assert 0 <= min(p.values) and max(p.values) < 1


@pytest.mark.parametrize("scheme", [
    make_builtin_scheme("fisher", N=3, theta=1),
    make_builtin_scheme("random_n", N=3),
    make_builtin_scheme("fisher", N=2, theta="1/10"),
], ids=lambda s: s.name)
def test_bounded_clusters(scheme):
    paths = sample_urn_paths(scheme, 20, 2000, seed=5)
    assert max(p.n_blocks for p in paths) <= scheme.max_clusters


def test_reproducible_across_runs_and_workers(py_half):
    a = sample_urn_paths(py_half, 12, 200, seed=42)
    b = sample_urn_paths(py_half, 12, 200, seed=42)
    c = sample_urn_paths(py_half, 12, 200, seed=42, workers=3)
    assert a == b == c
    assert [p.replicate_id for p in c] == list(range(200))
    assert sample_urn_paths(py_half, 12, 200, seed=43) != a


def test_urn_rejects_violating_scheme():
    s = custom_scheme(lambda e: Fraction(e * e), lambda n: Fraction(1), lambda i: Fraction(i + 1))
    with pytest.raises(ConditionViolation):
        for r in range(20):
            sample_urn_path(s, 5, rng=RngStreamSpec(0, r))


def test_atomic_base_path_frequencies():
    # Sampled atom sequences follow the exact atomic law.
    py = make_builtin_scheme("pitman_yor", alpha="1/2", theta=1)
    base = AtomicBase.uniform(2)
    n_rep = 40_000
    counts = Counter(
        sample_urn_path(py, 3, base, RngStreamSpec(11, r)).values for r in range(n_rep))
    for values in [(1, 2, 1), (1, 1, 2), (2, 2, 2), (1, 2, 2)]:
        p = float(atomic_sequence_probability(py, base, values))
        se = math.sqrt(p * (1 - p) / n_rep)
        assert abs(counts[values] / n_rep - p) <= 4 * se
    for p in counts:
        assert all(v in (1, 2) for v in p)


def test_atomic_path_merges_collisions():
    py = make_builtin_scheme("pitman_yor", alpha="1/2", theta=1)
    for r in range(30):
        p = sample_urn_path(py, 15, AtomicBase.uniform(2), RngStreamSpec(3, r))
        assert p.n_blocks <= 2
        assert len(set(p.values)) == p.n_blocks


def test_log_gamma_small_shape_moments():
    gen = np.random.default_rng(0)
    for shape in (0.01, 0.1, 0.5, 2.5):
        g = np.exp(_log_gamma(gen, np.full(200_000, shape)))
        assert within_se(g, shape, 4)
        assert np.all(np.isfinite(_log_gamma(gen, np.full(1000, shape))))


def test_stick_weights_sum_to_one():
    for alpha, theta, seed in [(0, 1, 0), ("1/2", 1, 1), ("3/10", "1/2", 2), ("9/10", 5, 3)]:
        m = sample_stick_breaking(Fraction(alpha), Fraction(theta), rng=RngStreamSpec(seed))
        assert np.all(m.weights >= 0)
        assert abs(m.total_mass() - 1) <= 1e-12
        assert m.weights.size <= 10_000
        if m.status == "ok":
            assert m.residual < 1e-12
        else:
            assert m.status == "k_max_reached" and m.weights.size == 10_000


def test_stick_k_max_warning():
    m = sample_stick_breaking(Fraction(1, 2), 1, trunc_eps=1e-12, k_max=50, rng=RngStreamSpec(0))
    assert m.status == "k_max_reached"
    assert m.weights.size == 50
    assert abs(m.total_mass() - 1) <= 1e-12


def test_stick_first_weight_mean():
    w1 = [sample_stick_breaking(0, 1, 1e-3, rng=RngStreamSpec(8, r)).weights[0]
          for r in range(20_000)]
    assert within_se(w1, 0.5)
    w1 = [sample_stick_breaking(Fraction(1, 2), 1, 1e-3, rng=RngStreamSpec(9, r)).weights[0]
          for r in range(20_000)]
    assert within_se(w1, 0.25)


def test_stick_parameter_errors():
    with pytest.raises(ValueError):
        sample_stick_breaking(1, 1)
    with pytest.raises(ValueError):
        sample_stick_breaking(Fraction(1, 2), Fraction(-1, 2))
    with pytest.raises(ValueError):
        sample_stick_breaking(0, 1, trunc_eps=0)


def test_lazy_stick_path_matches_full_measure():
    for r in range(100):
        spec = RngStreamSpec(5, r)
        lazy = stick_breaking_path(Fraction(1, 2), 1, 6, rng=spec)
        full = sample_iid_from_measure(
            sample_stick_breaking(Fraction(1, 2), 1, rng=spec.child(0)), 6, rng=spec.child(1))
        assert lazy.labels == full.labels
        assert lazy.values == full.values


def test_finite_dirichlet_basic():
    m = sample_finite_dirichlet(1, 3, RngStreamSpec(0))
    assert m.weights.tolist() == [1.0]
    m = sample_finite_dirichlet(100, 1, RngStreamSpec(0))
    assert np.all(m.weights >= 0) and abs(m.weights.sum() - 1) <= 1e-12 and m.residual == 0
    # theta/N far below 1 would underflow a naive Gamma sampler
    m = sample_finite_dirichlet(1000, Fraction(1, 100), RngStreamSpec(1))
    assert abs(m.weights.sum() - 1) <= 1e-12
    with pytest.raises(ValueError):
        sample_finite_dirichlet(0, 1)
    with pytest.raises(ValueError):
        sample_finite_dirichlet(3, 0)


def test_finite_dirichlet_two_atoms_uniform_weight():
    w = [sample_finite_dirichlet(2, 2, RngStreamSpec(4, r)).weights[0] for r in range(20_000)]
    assert within_se(w, 0.5)
    # Beta(1, 1): variance 1/12
    assert abs(np.var(w) - 1 / 12) < 0.005


def test_iid_from_measure_examples():
    one = DiscreteMeasure(np.array([0.3]), np.array([1.0]))
    assert sample_iid_from_measure(one, 5, RngStreamSpec(0)).labels == (0,) * 5
    two = DiscreteMeasure(np.array([0.1, 0.9]), np.array([0.5, 0.5]))
    same = [sample_iid_from_measure(two, 2, RngStreamSpec(1, r)).labels == (0, 0)
            for r in range(20_000)]
    assert within_se(same, 0.5)
    tiny = DiscreteMeasure(np.array([0.1, 0.9]), np.array([0.5, 0.5 - 1e-12]), 1e-12)
    paths = [sample_iid_from_measure(tiny, 1000, RngStreamSpec(2, r)) for r in range(20)]
    assert all(p.n_blocks <= 2 for p in paths)


def test_iid_from_measure_residual_gives_fresh_values():
    m = DiscreteMeasure(np.array([0.5]), np.array([0.25]), 0.75)
    p = sample_iid_from_measure(m, 400, RngStreamSpec(3))
    atom_hits = sum(1 for v in p.values if v == 0.5)
    assert 0 < atom_hits < 400
    assert p.n_blocks == 400 - atom_hits + 1
    with pytest.raises(ValueError):
        sample_iid_from_measure(DiscreteMeasure(np.array([]), np.array([]), 1.0), 3)


def test_fisher_measure_matches_fisher_urn():
    for N in (2, 5):
        table = partition_table(make_builtin_scheme("fisher", N=N, theta=1), 4)
        paths = sample_fisher_paths(N, 1, 4, 100_000, seed=N)
        assert tv(table, paths, 4) <= 0.02


def test_finite_dirichlet_path_reproducible():
    a = finite_dirichlet_path(5, 1, 10, RngStreamSpec(3, 2))
    assert a == finite_dirichlet_path(5, 1, 10, RngStreamSpec(3, 2))
    assert a.replicate_id == 2
