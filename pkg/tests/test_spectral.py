import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swave.spectral import (
    Field,
    PairState,
    build_grid,
    embed,
    lambda_pow_apply,
    product_norm,
    project,
    random_initial_state,
    sobolev_norm,
    state_from_json,
    state_to_json,
    zero_state,
)

PI2 = math.pi**2


def _field(grid, coeffs):
    return Field(grid, np.asarray(coeffs, dtype=float))


def test_eigenvalues_1d():
    g = build_grid(1, 3)
    np.testing.assert_allclose(g.eigenvalues, [PI2, 4 * PI2, 9 * PI2], rtol=1e-15)
    np.testing.assert_allclose(g.eigenvalues, [9.8696, 39.478, 88.826], rtol=1e-4)


def test_eigenvalues_2d_ordering():
    assert build_grid(2, 1).eigenvalues[0] == pytest.approx(2 * PI2)
    g = build_grid(2, 2)
    np.testing.assert_allclose(g.eigenvalues, [2 * PI2, 5 * PI2, 5 * PI2, 8 * PI2])
    assert g.indices.tolist() == [[1, 1], [1, 2], [2, 1], [2, 2]]
    assert g.lambda_max == pytest.approx(8 * PI2)


@pytest.mark.parametrize("dim, n", [(0, 3), (3, 2), (1, 0), (2, 1.5)])
def test_build_grid_rejects(dim, n):
    with pytest.raises(ValueError):
        build_grid(dim, n)


def test_grid_is_immutable():
    g = build_grid(1, 4)
    with pytest.raises(ValueError):
        g.eigenvalues[0] = 1.0


def test_field_validation():
    g = build_grid(1, 3)
    with pytest.raises(ValueError, match="does not match"):
        Field(g, [1.0, 2.0])
    with pytest.raises(ValueError, match="finite"):
        Field(g, [1.0, np.nan, 0.0])


def test_field_rejects_cross_grid_arithmetic():
    with pytest.raises(ValueError, match="grid mismatch"):
        build_grid(1, 2).zeros() + build_grid(1, 3).zeros()


def test_sobolev_examples():
    g = build_grid(1, 2)
    assert sobolev_norm(_field(g, [1, 0]), 1.0) == pytest.approx(math.pi, rel=1e-15)
    c = np.array([3.0, -4.0])
    assert sobolev_norm(_field(g, c), 0.0) == 5.0
    expected = math.sqrt(1 / math.pi**4 + 1 / (16 * math.pi**4))
    assert sobolev_norm(_field(g, [1, 1]), -2.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.1044395, abs=1e-7)


def test_product_norm_examples():
    g = build_grid(1, 1)
    one, zero = _field(g, [1.0]), g.zeros()
    assert product_norm(PairState(zero, one), 1.0) == 1.0
    assert product_norm(PairState(one, zero), 1.0) == pytest.approx(math.pi)
    val = product_norm(PairState(one, one), 2.0)
    assert val == pytest.approx(math.sqrt(math.pi**4 + math.pi**2), rel=1e-14)
    assert val == pytest.approx(10.357543, abs=1e-6)


def test_lambda_pow_examples(rng):
    g = build_grid(1, 5)
    f = _field(g, rng.normal(size=5))
    assert lambda_pow_apply(f, 0) is f
    assert lambda_pow_apply(_field(g, [1, 0, 0, 0, 0]), 0.5).coeffs[0] == pytest.approx(math.pi)
    back = lambda_pow_apply(lambda_pow_apply(f, 1.3), -1.3)
    np.testing.assert_allclose(back.coeffs, f.coeffs, rtol=1e-14)


def test_project_embed_examples():
    fine = build_grid(1, 4)
    f = _field(fine, [1, 2, 3, 4])
    assert project(f, build_grid(1, 2)).coeffs.tolist() == [1, 2]
    assert project(f, fine).coeffs.tolist() == [1, 2, 3, 4]
    assert embed(_field(build_grid(1, 2), [1, 2]), fine).coeffs.tolist() == [1, 2, 0, 0]
    g2 = build_grid(2, 2)
    f2 = _field(g2, [5, 6, 7, 8])
    assert project(f2, build_grid(2, 1)).coeffs.tolist() == [5]
    assert embed(_field(build_grid(2, 1), [5]), g2).coeffs.tolist() == [5, 0, 0, 0]
    with pytest.raises(ValueError):
        project(_field(build_grid(1, 2), [1, 2]), fine)


def test_random_initial_state():
    g = build_grid(1, 2)
    x = random_initial_state(g, 0, bits=[1, 1])
    np.testing.assert_allclose(x.u.coeffs, [1 / PI2, 1 / (4 * PI2)], rtol=1e-15)
    big = build_grid(2, 8)
    a, b = random_initial_state(big, 7), random_initial_state(big, 7)
    assert np.array_equal(a.u.coeffs, b.u.coeffs)
    assert not np.any(a.v.coeffs)
    bits = a.u.coeffs * big.eigenvalues
    assert set(np.round(bits, 12)) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        random_initial_state(g, 0, bits=[1])


def test_json_roundtrip(rng):
    g = build_grid(2, 3)
    x = PairState(_field(g, rng.normal(size=9)), _field(g, rng.normal(size=9)))
    text = state_to_json(x)
    assert set(json.loads(text)) == {"dim", "n_per_axis", "u", "v"}
    y = state_from_json(text)
    assert np.array_equal(x.u.coeffs, y.u.coeffs) and np.array_equal(x.v.coeffs, y.v.coeffs)
    with pytest.raises(ValueError, match="missing"):
        state_from_json('{"dim": 1}')


coeff_lists = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=12)


@settings(max_examples=60, deadline=None)
@given(coeff_lists, st.floats(-2, 2), st.floats(0, 2))
def test_norm_interleaving(coeffs, alpha, gap):
    g = build_grid(1, len(coeffs))
    f = _field(g, coeffs)
    beta = alpha + gap
    lhs = sobolev_norm(f, alpha)
    rhs = g.lambda_min ** ((alpha - beta) / 2) * sobolev_norm(f, beta)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@settings(max_examples=60, deadline=None)
@given(coeff_lists)
def test_parseval(coeffs):
    f = _field(build_grid(1, len(coeffs)), coeffs)
    c = np.asarray(coeffs)
    assert sobolev_norm(f, 0.0) ** 2 == pytest.approx(float(np.dot(c, c)), rel=1e-14, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(2, 10), st.data())
def test_projection_error_bound(dim, n_fine, data):
    n_coarse = data.draw(st.integers(1, n_fine - 1))
    fine = build_grid(dim, n_fine)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    f = _field(fine, rng.normal(size=fine.n_modes))
    coarse = build_grid(dim, n_coarse)
    rest = f - embed(project(f, coarse), fine)
    # smallest eigenvalue outside the tensor set {1..n}^d
    lam_star = math.pi**2 * ((n_coarse + 1) ** 2 + (dim - 1))
    for kappa in (1, 2):
        bound = lam_star ** (-kappa / 2) * sobolev_norm(f, kappa)
        assert sobolev_norm(rest, 0) <= bound * (1 + 1e-12)
    assert np.array_equal(project(embed(project(f, coarse), fine), coarse).coeffs,
                          project(f, coarse).coeffs)


def test_zero_state():
    x = zero_state(build_grid(2, 3))
    assert product_norm(x, 1.0) == 0.0
