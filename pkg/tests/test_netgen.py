from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from rqmc import netgen
from rqmc.netgen import ElementaryInterval, generate_points


def _digit_reversal(i, b):
    out, w = Fraction(0), Fraction(1, b)
    while i:
        i, a = divmod(i, b)
        out += a * w
        w /= b
    return out


def test_radical_inverse_examples():
    assert netgen.radical_inverse(0, 2) == 0.0
    assert [netgen.radical_inverse(i, 2) for i in (1, 2, 3)] == [0.5, 0.25, 0.75]
    assert netgen.radical_inverse(5, 3) == pytest.approx(7 / 9, abs=1e-15)


@given(st.integers(0, 10**6), st.sampled_from([2, 3, 5, 7]))
def test_radical_inverse_matches_rational_oracle(i, b):
    assert netgen.radical_inverse(i, b) == pytest.approx(float(_digit_reversal(i, b)), abs=1e-15)


def test_identity_matrices_give_van_der_corput():
    P = generate_points(netgen.identity_matrices(2, 1), 0, 4)
    assert P.points[:, 0].tolist() == [0.0, 0.5, 0.25, 0.75]


def test_sobol_first_four_points():
    P = generate_points(netgen.sobol_matrices(None, 2), 0, 4)
    assert P.points.tolist() == [[0, 0], [0.5, 0.5], [0.25, 0.75], [0.75, 0.25]]


def test_empty_count():
    P = generate_points(netgen.sobol_matrices(None, 3), 0, 0)
    assert P.n == 0 and P.points.shape == (0, 3)


def test_sobol_matches_scipy_unscrambled():
    d, n = 50, 1024
    G = netgen.sobol_matrices(None, d)
    ref = qmc.Sobol(d, scramble=False).random(n)
    # scipy emits Gray-code order
    np.testing.assert_array_equal(generate_points(G, 0, n, gray=True).points, ref)
    natural = generate_points(G, 0, n).points
    assert sorted(map(tuple, natural)) == sorted(map(tuple, ref))


def test_sobol_row_recurrence_by_hand():
    # s=1, a=0, m_1=1 gives m = 1, 3, 5, 15, 17: Pascal's triangle mod 2
    G = netgen.sobol_matrices("d s a m_i\n2 1 0 1\n", 2, E=5)
    expected = np.array([[1, 1, 1, 1, 1], [0, 1, 0, 1, 0], [0, 0, 1, 1, 0], [0, 0, 0, 1, 0], [0, 0, 0, 0, 1]])
    np.testing.assert_array_equal(G.matrices[1], expected)
    np.testing.assert_array_equal(G.matrices[0], np.eye(5, dtype=np.uint8))


def test_sobol_dimension_one_ignores_file():
    G = netgen.sobol_matrices("garbage that is never parsed", 1, E=8)
    np.testing.assert_array_equal(G.matrices[0], np.eye(8, dtype=np.uint8))


def test_sobol_matrices_upper_triangular_nonsingular():
    G = netgen.sobol_matrices(None, 20)
    for C in G.matrices:
        assert np.all(np.tril(C, -1) == 0) and np.all(np.diag(C) == 1)


def test_sobol_too_many_dimensions():
    with pytest.raises(netgen.DirectionFileError):
        netgen.sobol_matrices("d s a m_i\n2 1 0 1\n", 3)


def test_direction_file_errors_name_the_line(tmp_path):
    p = tmp_path / "dirs.txt"
    p.write_text("d s a m_i\n2 1 0 1\n3 2 1 1 4\n")
    with pytest.raises(netgen.DirectionFileError, match="dirs.txt:3"):
        netgen.sobol_matrices(str(p), 3)


def test_direction_file_env(tmp_path, monkeypatch):
    p = tmp_path / "dirs.txt"
    p.write_text("d s a m_i\n2 1 0 1\n")
    monkeypatch.setenv(netgen.DIRECTION_FILE_ENV, str(p))
    G = netgen.sobol_matrices(None, 2, E=5)
    assert str(p) in G.provenance
    with pytest.raises(netgen.DirectionFileError):
        netgen.sobol_matrices(None, 3)


def test_faure_pascal_matrix():
    G = netgen.faure_matrices(3, 2, E=3)
    np.testing.assert_array_equal(G.matrices[0], np.eye(3))
    np.testing.assert_array_equal(G.matrices[1], [[1, 1, 1], [0, 1, 2], [0, 0, 1]])


def test_faure_rejects_bad_arguments():
    with pytest.raises(ValueError):
        netgen.faure_matrices(4, 2)
    with pytest.raises(ValueError):
        netgen.faure_matrices(3, 4)


def test_precision_limit():
    G = netgen.sobol_matrices(None, 2, E=4)
    with pytest.raises(netgen.PrecisionError):
        generate_points(G, 0, 17)


def test_prefix_consistency():
    for G in (netgen.sobol_matrices(None, 5), netgen.faure_matrices(5, 3)):
        b = G.base
        big = generate_points(G, 0, b**4)
        small = generate_points(G, 0, b**3)
        np.testing.assert_array_equal(big.digits[: b**3], small.digits)
        np.testing.assert_array_equal(big.points[: b**3], small.points)


def test_offset_generation_matches_slice():
    G = netgen.faure_matrices(3, 3)
    full = generate_points(G, 0, 100)
    part = generate_points(G, 37, 20)
    np.testing.assert_array_equal(full.digits[37:57], part.digits)
    assert part.i_start == 37


def test_gray_code_changes_order_not_contents():
    G = netgen.sobol_matrices(None, 3)
    a = generate_points(G, 0, 64).points
    g = generate_points(G, 0, 64, gray=True).points
    assert not np.array_equal(a, g)
    assert sorted(map(tuple, a)) == sorted(map(tuple, g))


def test_points_in_unit_cube_and_digit_exact():
    for G in (netgen.sobol_matrices(None, 4), netgen.faure_matrices(3, 3), netgen.faure_matrices(7, 2)):
        P = generate_points(G, 0, 500)
        x = P.points
        assert np.all((x >= 0) & (x < 1))
        # floats resolve about 52 bits; compare the digits they can carry
        E = min(G.precision, int(52 / np.log2(G.base)))
        np.testing.assert_array_equal(netgen.digits_from_float(x, G.base, E), P.digits[:, :, :E])


def test_digit_value_is_exact_in_base_two():
    P = generate_points(netgen.sobol_matrices(None, 2), 0, 256)
    w = [Fraction(1, 2 ** (k + 1)) for k in range(P.precision)]
    for i in (3, 77, 255):
        for j in range(2):
            exact = sum(int(a) * wk for a, wk in zip(P.digits[i, j], w))
            assert Fraction(P.points[i, j]) == exact


def test_interval_volume():
    assert netgen.interval_volume(ElementaryInterval((0, 0), (0, 0), 2)) == 1
    assert netgen.interval_volume(ElementaryInterval((1, 2), (0, 3), 2)) == Fraction(1, 8)
    assert netgen.interval_volume(ElementaryInterval((2,), (4,), 3)) == Fraction(1, 9)


def test_interval_rejects_bad_anchor():
    with pytest.raises(ValueError):
        ElementaryInterval((1,), (2,), 2)


def test_locate_examples():
    assert netgen.locate((0.0, 0.0, 0.0), (3, 1, 2), 2) == (0, 0, 0)
    assert netgen.locate((0.75, 0.25), (2, 2), 2) == (3, 1)


def test_locate_membership_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(10_000 // 50):
        b = int(rng.choice([2, 3, 5]))
        k = tuple(int(v) for v in rng.integers(0, 5, size=2))
        for x in rng.random((50, 2)):
            assert ElementaryInterval(k, netgen.locate(x, k, b), b).contains(x)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=3), st.integers(0, 6), st.sampled_from([2, 3]))
def test_membership_is_half_open(x, kk, b):
    k = (kk,) * len(x)
    iv = ElementaryInterval(k, netgen.locate(x, k, b), b)
    lo, hi = zip(*iv.bounds())
    assert all(Fraction(l) <= Fraction(v) < Fraction(h) for l, v, h in zip(lo, x, hi))


def test_points_from_float_round_trip():
    x = np.array([[0.0, 0.5], [0.25, 0.875]])
    P = netgen.DigitalPointSet.from_points(x, 2, 8)
    np.testing.assert_array_equal(P.points, x)


def test_slice_keeps_indices():
    P = generate_points(netgen.sobol_matrices(None, 2), 0, 16)
    Q = P[4:8]
    assert Q.i_start == 4 and Q.n == 4
    with pytest.raises(TypeError):
        P[::2]
