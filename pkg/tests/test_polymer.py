import cmath
import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mottlab import polymer
from mottlab.polymer import PolymerSystem


def hard_rods(cells, length, w, a):
    rods = [tuple(range(i, i + length)) for i in range(cells - length + 1)]
    z = {(i, j): 1 for i, j in combinations(range(len(rods)), 2) if set(rods[i]) & set(rods[j])}
    z.update({(i, i): 1 for i in range(len(rods))})
    return PolymerSystem([w] * len(rods), z, [a] * len(rods))


def brute_graph_count(n):
    pairs = list(combinations(range(n), 2))
    count = 0
    for mask in range(1 << len(pairs)):
        adj = {v: set() for v in range(n)}
        for k, (i, j) in enumerate(pairs):
            if mask >> k & 1:
                adj[i].add(j)
                adj[j].add(i)
        seen, stack = {0}, [0]
        while stack:
            for u in adj[stack.pop()] - seen:
                seen.add(u)
                stack.append(u)
        count += len(seen) == n
    return count


@pytest.mark.parametrize("n,expected", [(1, 1), (2, 1), (3, 4), (4, 38), (5, 728)])
def test_connected_graph_counts(n, expected):
    graphs = list(polymer.connected_graphs(n))
    assert len(graphs) == expected == brute_graph_count(n)
    assert len(set(graphs)) == len(graphs)


def test_connected_graphs_limit():
    with pytest.raises(ValueError):
        next(polymer.connected_graphs(9))
    with pytest.raises(ValueError):
        next(polymer.connected_graphs(0))


@pytest.mark.parametrize("n", range(1, 8))
def test_phi_all_pairs_hard_core(n):
    value = polymer.phi([0] * n, lambda a, b: 1)
    assert value == Fraction((-1) ** (n - 1), n)


def test_subset_recursion_matches_graph_sum(rng):
    for n in range(2, 6):
        for _ in range(5):
            f = [[0] * n for _ in range(n)]
            for i, j in combinations(range(n), 2):
                f[i][j] = f[j][i] = Fraction(int(rng.integers(-6, 7)), 5)
            assert polymer._graph_sum(f) == polymer._subset_recursion(f)


@given(st.integers(2, 6), st.integers(1, 5), st.randoms(use_true_random=False))
def test_phi_vanishes_when_disconnected(n, cut, rnd):
    cut = min(cut, n - 1)
    side = {k: k < cut for k in range(n)}
    table = {}
    for i, j in combinations(range(n), 2):
        table[i, j] = 0 if side[i] != side[j] else rnd.choice([0, 0.5, 1])

    def z(a, b):
        return table[min(a, b), max(a, b)]

    assert polymer.phi(list(range(n)), z) == 0


@given(st.lists(st.sampled_from([0, 1, 0.25, 0.5]), min_size=10, max_size=10), st.permutations(range(5)))
def test_phi_permutation_symmetric(vals, perm):
    pairs = list(combinations(range(5), 2))
    table = dict(zip(pairs, vals))

    def z(a, b):
        return table[min(a, b), max(a, b)] if a != b else 1

    assert polymer.phi(list(range(5)), z) == polymer.phi(list(perm), z)


def test_phi_complex_weights():
    z = 0.5 + 0.5j

    def zeta(a, b):
        return z

    # n=2: -zeta/2; n=3: (3 zeta^2 - zeta^3)/6
    assert complex(polymer.phi([0, 1], zeta)) == pytest.approx(-z / 2)
    assert complex(polymer.phi([0, 1, 2], zeta)) == pytest.approx((3 * z**2 - z**3) / 6)


def test_system_validation_and_json_round_trip():
    s = PolymerSystem([0.1, 0.2 + 0.1j], {(1, 0): 0.5, (1, 1): 1}, [0.3, 0.4], ["a", "b"])
    assert s.zeta(0, 1) == s.zeta(1, 0) == 0.5
    assert s.zeta(0, 0) == 0
    back = PolymerSystem.from_json(s.to_json())
    assert back.weights == s.weights and back.zeta_table == s.zeta_table and back.ids == s.ids
    with pytest.raises(ValueError):
        PolymerSystem([0.1], {(0, 0): 3.0}, [0.1])
    with pytest.raises(ValueError):
        PolymerSystem([0.1], {}, [-1.0])


def test_partition_function_examples():
    assert PolymerSystem([], {}, []).__len__() == 0
    assert polymer.partition_function(PolymerSystem([], {}, [])).value == 1
    assert polymer.partition_function(PolymerSystem([0.3], {(0, 0): 1}, [0.5])).value == pytest.approx(1.3)
    free = polymer.partition_function(PolymerSystem([0.3], {}, [0.5]), n_poly_max=20)
    assert free.value == pytest.approx(math.exp(0.3), rel=1e-14)
    assert free.converged
    assert not polymer.partition_function(PolymerSystem([0.9], {}, [0.5]), n_poly_max=3).converged


def test_partition_function_hard_rods_transfer_matrix():
    # hard dimers on a segment of 7 cells: Z_n = Z_{n-1} + w Z_{n-2}
    w = 0.3
    s = hard_rods(7, 2, w, 1.0)
    Z = [1.0, 1.0]
    for _ in range(2, 8):
        Z.append(Z[-1] + w * Z[-2])
    assert polymer.partition_function(s).value == pytest.approx(Z[7], rel=1e-14)


def test_log_partition_single_polymer():
    s = PolymerSystem([0.1], {(0, 0): 1}, [0.2])
    r = polymer.log_partition_clusters(s, 6)
    assert r.value == pytest.approx(math.log(1.1), abs=1e-7)
    assert r.orders == pytest.approx([(-1) ** (n - 1) * 0.1**n / n for n in range(1, 7)], rel=1e-12)


def test_log_partition_free_gas_truncates():
    s = PolymerSystem([0.1, 0.2, 0.05], {}, [0.0, 0.0, 0.0])
    r = polymer.log_partition_clusters(s, 4)
    assert r.value == pytest.approx(0.35, abs=1e-15)
    assert r.orders[1:] == [0, 0, 0]


def test_log_partition_two_polymers():
    s = PolymerSystem([0.05, 0.05], {(0, 0): 1, (0, 1): 1, (1, 1): 1}, [0.2, 0.2])
    Z = polymer.partition_function(s).value
    assert polymer.log_partition_clusters(s, 8).value == pytest.approx(math.log(Z), abs=1e-6)


def test_kp_guard_and_force():
    s = PolymerSystem([0.5], {(0, 0): 1}, [0.2])
    report = polymer.kp_check(s)
    assert not report.satisfied
    assert report.slack == pytest.approx(0.2 - 0.5 * math.exp(0.2))
    with pytest.raises(polymer.KPViolation):
        polymer.log_partition_clusters(s, 3)
    with pytest.warns(UserWarning):
        polymer.log_partition_clusters(s, 3, force=True)


def test_kp_examples():
    r = polymer.kp_check(PolymerSystem([0.1], {(0, 0): 1}, [0.2]))
    assert r.satisfied and r.lhs[0] == pytest.approx(0.1 * math.exp(0.2))
    assert polymer.kp_check(PolymerSystem([5.0, 7.0], {}, [0.0, 0.0])).satisfied


def test_divergence_sentinel():
    s = PolymerSystem([3.0], {(0, 0): 1}, [0.0])
    with pytest.warns(UserWarning), pytest.raises(polymer.ClusterDivergence):
        polymer.log_partition_clusters(s, 8, force=True)


def test_cluster_bound_examples():
    zero = polymer.cluster_bound_check(PolymerSystem([0.1, 0.2], {}, [0.1, 0.1]), 0, 6)
    assert zero.lhs == 1
    single = polymer.cluster_bound_check(PolymerSystem([0.1], {(0, 0): 1}, [0.2]), 0, 8)
    # sum_{n>=1} n * (1/n) * w^{n-1}: the (1/n) is |phi|, n counts root positions
    assert single.lhs == pytest.approx(sum(0.1**k for k in range(8)), rel=1e-12)
    assert single.satisfied


def test_cluster_bound_matches_sequence_sum():
    # direct sum over ordered sequences with the root in front
    s = hard_rods(5, 2, 0.05, 0.2)
    K = 4
    direct = 1.0
    for n in range(2, K + 1):
        for rest in product(range(len(s)), repeat=n - 1):
            direct += n * abs(float(polymer.phi((0,) + rest, s.zeta))) * 0.05 ** (n - 1)
    assert polymer.cluster_bound_check(s, 0, K).lhs == pytest.approx(direct, rel=1e-12)


def test_log_partition_matches_sequence_sum():
    s = PolymerSystem([0.04, 0.07, 0.03], {(0, 0): 1, (0, 1): 0.5, (1, 1): 1, (1, 2): 1, (2, 2): 1}, [0.3] * 3)
    K = 4
    direct = 0.0
    for n in range(1, K + 1):
        for seq in product(range(3), repeat=n):
            direct += float(polymer.phi(seq, s.zeta)) * math.prod(s.weights[i] for i in seq)
    assert polymer.log_partition_clusters(s, K).value == pytest.approx(direct, rel=1e-13)


def random_small_zeta(seed, n=4, w=0.03):
    g = np.random.default_rng(seed)
    z = {(i, i): 1 for i in range(n)}
    for i, j in combinations(range(n), 2):
        if g.random() < 0.6:
            z[i, j] = float(np.round(g.uniform(0.1, 1.0), 3))
    return PolymerSystem([w] * n, z, [0.25] * n)


@pytest.mark.parametrize(
    "system",
    [hard_rods(8, 2, 0.05, 0.2), random_small_zeta(3), random_small_zeta(7)],
    ids=["rods", "random-a", "random-b"],
)
def test_cluster_series_converges(system):
    assert polymer.kp_check(system).satisfied
    Z = polymer.partition_function(system).value
    errs = [abs(math.exp(polymer.log_partition_clusters(system, K).value) - Z) for K in range(2, 7)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    for root in range(len(system)):
        assert polymer.cluster_bound_check(system, root, 4).satisfied


def test_complex_weights_synthetic():
    s = PolymerSystem([0.05 + 0.02j, 0.03 - 0.01j], {(0, 0): 1, (0, 1): 0.5 + 0.2j, (1, 1): 1}, [0.3, 0.3])
    Z = polymer.partition_function(s).value
    L = polymer.log_partition_clusters(s, 8).value
    assert abs(cmath.exp(L) - Z) < 1e-9
