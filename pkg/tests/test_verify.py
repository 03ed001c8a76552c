import numpy as np
import pytest
from oracles import brute_t, dense_grid_discrepancy

from rqmc import netgen, verify
from rqmc.netgen import DigitalPointSet, generate_points
from rqmc.scramble import NESTED_UNIFORM, ScrambleSpec, scramble_points

SOBOL_PREFIX = np.array([[0, 0], [0.5, 0.5], [0.25, 0.75], [0.75, 0.25]])


def test_sobol_prefix_is_a_zero_net():
    rep = verify.check_net(SOBOL_PREFIX, 0, 2, base=2)
    assert rep.passed and rep.failure is None


def test_repeated_point_fails_with_witness():
    x = np.tile([[0.3, 0.6]], (4, 1))
    rep = verify.check_net(x, 0, 2, base=2)
    assert not rep.passed
    f = rep.failure
    assert f.observed != f.required
    inside = sum(f.interval.contains(p) for p in x)
    assert inside == f.observed


def test_t_equal_m_passes_vacuously():
    x = np.tile([[0.3, 0.6]], (8, 1))
    assert verify.check_net(x, 3, 3, base=2).passed


def test_faure_nine_points():
    P = generate_points(netgen.faure_matrices(3, 2), 0, 9)
    assert verify.exact_t(P, 2) == 0


def test_diagonal_grid_t_from_oracle():
    x = np.array([[i / 4, i / 4] for i in range(4)])
    assert verify.exact_t(x, 2, base=2) == brute_t(x, 2, 2) == 1


def test_check_net_monotone_in_t():
    P = generate_points(netgen.sobol_matrices(None, 5), 0, 2**9)
    t = verify.exact_t(P, 9)
    assert not verify.check_net(P, t - 1, 9).passed
    assert all(verify.check_net(P, s, 9).passed for s in range(t, 10))


def test_exact_t_invariant_under_coordinate_permutation():
    P = generate_points(netgen.sobol_matrices(None, 4), 0, 2**8)
    Q = DigitalPointSet(P.digits[:, [2, 0, 3, 1], :], 2)
    assert verify.exact_t(P, 8) == verify.exact_t(Q, 8)


def test_exact_t_matches_brute_force_for_random_sets():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.integers(0, 16, size=(16, 2)) / 16
        assert verify.exact_t(x, 4, base=2) == brute_t(x, 2, 4)


def test_nets_seed_invariant_t():
    P = generate_points(netgen.sobol_matrices(None, 3), 0, 2**7)
    t = verify.exact_t(P, 7)
    for seed in range(50):
        Q = scramble_points(P, ScrambleSpec(NESTED_UNIFORM, 2, 32, seed))
        assert verify.exact_t(Q, 7) == t


def test_cardinality_checked():
    with pytest.raises(ValueError):
        verify.check_net(SOBOL_PREFIX[:3], 0, 2, base=2)


def test_check_sequence_passes_and_skips_small_m():
    G = netgen.sobol_matrices(None, 2)
    rep = verify.check_sequence(G, 0, 8, 4)
    assert rep.passed and rep.blocks_checked == 9 * 4
    G3 = netgen.sobol_matrices(None, 3)
    rep = verify.check_sequence(G3, 1, 6, 3)
    assert rep.passed and rep.blocks_checked == 6 * 3


def test_check_sequence_detects_misalignment():
    P = generate_points(netgen.sobol_matrices(None, 2), 1, 4 * 2**6)
    P = DigitalPointSet(P.digits, 2)  # re-indexed off by one
    rep = verify.check_sequence(P, 0, 6, 4)
    assert not rep.passed and rep.first_failure is not None


def test_scrambled_sequence_blocks():
    G = netgen.sobol_matrices(None, 2)
    assert verify.check_sequence(G, 0, 8, 4, spec=ScrambleSpec(NESTED_UNIFORM, 2, 32, 6)).passed


def test_discrepancy_one_dimensional_cases():
    assert verify.star_discrepancy_exact(np.array([[0.0]])).value == 1.0
    assert verify.star_discrepancy_exact(np.array([[0.5]])).value == 0.5
    x = ((2 * np.arange(1, 5) - 1) / 8)[:, None]
    assert verify.star_discrepancy_exact(x).value == 0.125


def test_discrepancy_matches_dense_grid():
    rng = np.random.default_rng(8)
    for n in (1, 5, 17, 40):
        x = rng.random((n, 2))
        assert abs(verify.star_discrepancy_exact(x).value - dense_grid_discrepancy(x)) < 1e-3


def test_discrepancy_three_dimensions_against_brute_corners():
    rng = np.random.default_rng(2)
    x = rng.random((12, 3))
    grid = [np.append(np.unique(x[:, j]), 1.0) for j in range(3)]
    corners = np.stack(np.meshgrid(*grid, indexing="ij"), -1).reshape(-1, 3)
    vol = corners.prod(axis=1)
    lt = (x[None] < corners[:, None]).all(-1).mean(-1)
    le = (x[None] <= corners[:, None]).all(-1).mean(-1)
    ref = max((vol - lt).max(), (le - vol).max())
    assert verify.star_discrepancy_exact(x).value == pytest.approx(ref, abs=1e-15)


def test_discrepancy_witness_realizes_value():
    x = np.random.default_rng(4).random((30, 2))
    res = verify.star_discrepancy_exact(x)
    a = np.asarray(res.witness)
    vol = a.prod()
    if res.side == "open":
        val = vol - (x < a).all(axis=1).mean()
    else:
        val = (x <= a).all(axis=1).mean() - vol
    assert val == pytest.approx(res.value, abs=1e-15)


def test_discrepancy_limits():
    with pytest.raises(verify.DiscrepancyLimitError):
        verify.star_discrepancy_exact(np.zeros((5, 4)))
    with pytest.raises(verify.DiscrepancyLimitError):
        verify.star_discrepancy_exact(np.zeros((1025, 1)))


def test_lower_bound_below_exact():
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = rng.random((int(rng.integers(1, 64)), 2))
        assert verify.star_discrepancy_lower_bound(x, 500, seed=1).value <= verify.star_discrepancy_exact(x).value + 1e-15
    with pytest.raises(ValueError):
        verify.star_discrepancy_lower_bound(x, 0)


def test_sobol_lower_bound_beats_random():
    sob = generate_points(netgen.sobol_matrices(None, 2), 0, 512).points
    wins = 0
    for seed in range(10):
        rnd = np.random.default_rng(seed).random((256, 2))
        a = verify.star_discrepancy_lower_bound(sob, 2000, seed=seed).value
        b = verify.star_discrepancy_lower_bound(rnd, 2000, seed=seed).value
        wins += a < b
    assert wins >= 9


def test_uniformity_rejects_constant_points():
    x = np.full((4000, 2), 0.3)
    assert not verify.uniformity_chi_square(x, 8).passed


def test_uniformity_needs_enough_replicates():
    with pytest.raises(ValueError):
        verify.uniformity_chi_square(np.random.default_rng(0).random((100, 1)), 8)
