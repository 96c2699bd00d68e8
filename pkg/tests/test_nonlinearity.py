import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import project_pointwise_1d
from swave.nonlinearity import (
    apply_F,
    apply_F_jacobian,
    check_assumptions,
    default_collocation_size,
    dense_sine_matrix,
    make_cubic,
    make_function,
    make_named,
    make_plan,
    make_polynomial,
    sine_analysis,
    sine_synthesis,
)
from swave.spectral import Field, build_grid


@pytest.fixture
def cubic():
    return make_cubic()


def test_cubic_values(cubic):
    assert cubic.f(0.0) == 0.0 and cubic.f_prime(0.0) == 1.0
    assert cubic.f(1.0) == 0.0 and cubic.f(2.0) == -6.0
    v = np.linspace(-5, 5, 1001)
    assert np.max(cubic.f_prime(v)) == pytest.approx(1.0)
    assert (cubic.gamma, cubic.c0, cubic.c1, cubic.c2, cubic.c3) == (3, 1, 1, 3, 6)
    assert cubic.dpoly == (1.0, 0.0, -3.0)


def test_gamma_below_two_rejected():
    with pytest.raises(ValueError):
        make_polynomial((0, 1), gamma=1.5)


def test_unknown_name():
    with pytest.raises(ValueError, match="unknown nonlinearity"):
        make_named("quartic")


def test_collocation_size():
    assert default_collocation_size(100, 3) == 511
    assert default_collocation_size(16, 3) == 63
    assert default_collocation_size(10, None) == 63
    assert default_collocation_size(4, 0) == 7


def test_synthesis_closed_form(backend):
    g = build_grid(1, 1)
    plan = make_plan(g, m_quad=3, backend=backend)
    np.testing.assert_allclose(sine_synthesis(Field(g, [1.0]), plan), [1, math.sqrt(2), 1],
                               rtol=1e-15)
    assert not np.any(sine_synthesis(g.zeros(), plan))
    np.testing.assert_allclose(plan.nodes, [0.25, 0.5, 0.75])


@pytest.mark.parametrize("dim, n, m", [(1, 5, 5), (1, 7, 31), (2, 3, 7), (2, 4, 15)])
def test_analysis_inverts_synthesis(backend, rng, dim, n, m):
    g = build_grid(dim, n)
    plan = make_plan(g, m_quad=m, backend=backend)
    f = Field(g, rng.normal(size=g.n_modes))
    back = sine_analysis(sine_synthesis(f, plan), plan)
    np.testing.assert_allclose(back.coeffs, f.coeffs, rtol=1e-13, atol=1e-14)


def test_synthesis_matches_dense_matrix(backend, rng):
    g = build_grid(1, 9)
    plan = make_plan(g, m_quad=31, backend=backend)
    c = rng.normal(size=9)
    np.testing.assert_allclose(sine_synthesis(Field(g, c), plan), dense_sine_matrix(9, 31) @ c,
                               atol=1e-13)
    g2 = build_grid(2, 3)
    plan2 = make_plan(g2, m_quad=7, backend=backend)
    c2 = rng.normal(size=(3, 3))
    s = dense_sine_matrix(3, 7)
    np.testing.assert_allclose(sine_synthesis(Field(g2, c2.ravel()), plan2),
                               (s @ c2 @ s.T).ravel(), atol=1e-13)


def test_analysis_truncates_to_target(backend, rng):
    g = build_grid(1, 6)
    plan = make_plan(g, m_quad=15, backend=backend)
    f = Field(g, rng.normal(size=6))
    out = sine_analysis(sine_synthesis(f, plan), plan, target=build_grid(1, 2))
    np.testing.assert_allclose(out.coeffs, f.coeffs[:2], atol=1e-14)
    with pytest.raises(ValueError):
        sine_analysis(np.zeros(4), plan)


def test_apply_F_examples(backend, cubic):
    for n, expected in [(3, [-0.5, 0.0, 0.5]), (5, [-0.5, 0, 0.5, 0, 0]), (2, [-0.5, 0.0])]:
        g = build_grid(1, n)
        v = Field(g, np.eye(n)[0])
        out = apply_F(cubic, v, make_plan(g, cubic, backend=backend))
        np.testing.assert_allclose(out.coeffs, expected, atol=1e-14)
    g = build_grid(2, 3)
    assert not np.any(apply_F(cubic, g.zeros(), make_plan(g, cubic, backend=backend)).coeffs)


def test_plan_too_small(cubic):
    g = build_grid(1, 8)
    with pytest.raises(ValueError, match="too small"):
        make_plan(g, cubic, m_quad=15)
    with pytest.raises(ValueError, match="cannot project"):
        apply_F(cubic, g.zeros(), make_plan(g, m_quad=15))


def test_non_polynomial_flagged_inexact(rng):
    spec = make_function(np.sin, np.cos, lambda v: -np.sin(v), 2.0, 1.0, 1.0, 1.0, 1.0)
    g = build_grid(1, 8)
    plan = make_plan(g, spec)
    assert plan.m_quad >= 32 and not plan.is_exact_for(spec)
    v = rng.normal(size=8) / np.arange(1, 9) ** 2
    got = apply_F(spec, Field(g, v), plan).coeffs
    np.testing.assert_allclose(got, project_pointwise_1d(np.sin, v), atol=1e-6)


def test_jacobian_basic(backend, cubic, rng):
    g = build_grid(1, 6)
    plan = make_plan(g, cubic, backend=backend)
    w = Field(g, rng.normal(size=6))
    assert not np.any(apply_F_jacobian(cubic, Field(g, rng.normal(size=6)), g.zeros(), plan).coeffs)
    np.testing.assert_allclose(apply_F_jacobian(cubic, g.zeros(), w, plan).coeffs, w.coeffs,
                               atol=1e-14)


def test_jacobian_linear_and_symmetric(backend, cubic, rng):
    g = build_grid(2, 5)
    plan = make_plan(g, cubic, backend=backend)
    v, w, z = (Field(g, rng.normal(size=25)) for _ in range(3))
    jw = apply_F_jacobian(cubic, v, w, plan).coeffs
    jz = apply_F_jacobian(cubic, v, z, plan).coeffs
    comb = apply_F_jacobian(cubic, v, 2.0 * w + z, plan).coeffs
    np.testing.assert_allclose(comb, 2 * jw + jz, atol=1e-10)
    assert np.dot(jw, z.coeffs) == pytest.approx(np.dot(w.coeffs, jz), abs=1e-11 * np.abs(jw).sum())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_one_sided_lipschitz(dim, n, seed):
    cubic = make_cubic()
    g = build_grid(dim, n)
    plan = make_plan(g, cubic)
    rng = np.random.default_rng(seed)
    v, w = Field(g, rng.normal(size=g.n_modes)), Field(g, rng.normal(size=g.n_modes))
    d = v.coeffs - w.coeffs
    lhs = np.dot(apply_F(cubic, v, plan).coeffs - apply_F(cubic, w, plan).coeffs, d)
    assert lhs <= cubic.c1 * np.dot(d, d) + 1e-10


def test_check_assumptions_cubic(cubic):
    rep = check_assumptions(cubic)
    assert rep.ok
    assert rep.tightest["c1"] == pytest.approx(1.0)
    assert rep.tightest["c0"] <= 1.0


def test_check_assumptions_failures():
    sq = check_assumptions(make_named("square"))
    assert not sq.passed["c1"] and not sq.ok
    ex = check_assumptions(make_named("exp"))
    assert not ex.passed["c1"]
    with pytest.raises(ValueError):
        check_assumptions(make_cubic(), (1.0, -1.0))
    with pytest.raises(ValueError):
        check_assumptions(make_cubic(), samples=1)
