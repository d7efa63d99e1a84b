import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ibcsplit.discretize import FaceBC, assemble_operator_1d, build_grid_1d
from ibcsplit.flows import (BlowUpError, IbcStepContext, ReactionTerm, bernoulli_flow,
                            diffusion_halfstep, pointwise_rk_flow, reaction_flow_modified,
                            reaction_flow_raw)
from ibcsplit.opfunc import plan_from_matrix, plan_spectral

SQUARE = ReactionTerm()


def ctx_for(c, f=SQUARE):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    f_c = f(0.0, c)
    return IbcStepContext(c, np.zeros_like(c), f, f_c)


class TestReactionTerm:
    def test_square(self):
        np.testing.assert_array_equal(SQUARE(0.0, np.array([2.0, -3.0])), [4.0, 9.0])
        assert SQUARE.has_closed_form

    def test_logistic(self):
        f = ReactionTerm("logistic", (2.0, 4.0))
        assert f(0.0, np.array(1.0)) == pytest.approx(2.0 * 1.0 * 0.75)
        assert f.has_closed_form

    def test_custom_polynomial(self):
        f = ReactionTerm("custom-polynomial", (1.0, 0.0, 0.0, 2.0))
        assert f(0.0, np.array(2.0)) == 17.0
        assert not f.has_closed_form
        assert f.degree == 3

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            ReactionTerm("cubic")

    def test_zero(self):
        z = ReactionTerm.zero()
        assert z(0.0, np.array([3.0]))[0] == 0.0


class TestRawFlow:
    def test_closed_form(self):
        assert reaction_flow_raw(SQUARE, np.array([1.0]), 0.0, 0.5)[0] == pytest.approx(2.0, rel=1e-15)

    def test_fixed_point(self):
        for dt in (0.0, 0.1, 10.0):
            assert reaction_flow_raw(SQUARE, np.zeros(3), 0.0, dt).tolist() == [0.0, 0.0, 0.0]

    def test_blow_up(self):
        with pytest.raises(BlowUpError) as info:
            reaction_flow_raw(SQUARE, np.array([0.1, 3.0, 5.0]), 0.0, 0.4)
        assert info.value.index == 1

    def test_non_closed_form_uses_rk(self):
        # w' = 1 + w^2 -> tan(t + atan(w0)); constant term rules out the closed form
        f = ReactionTerm("custom-polynomial", (1.0, 0.0, 1.0))
        assert not f.has_closed_form
        w0 = np.array([0.0, 0.5, -1.0])
        out = reaction_flow_raw(f, w0, 0.0, 0.3)
        np.testing.assert_allclose(out, np.tan(0.3 + np.arctan(w0)), atol=1e-10)

    def test_logistic_closed_form(self):
        rate, cap = 3.0, 2.0
        f = ReactionTerm("logistic", (rate, cap))
        w0 = np.array([0.5, 1.0, 3.0])
        t = 0.4
        exact = cap * w0 * np.exp(rate * t) / (cap + w0 * (np.exp(rate * t) - 1))
        np.testing.assert_allclose(reaction_flow_raw(f, w0, 0.0, t), exact, rtol=1e-13)


class TestModifiedFlow:
    def test_compatibility_zero(self):
        for c in (np.array([1.0, -2.0, 0.0]), np.array([5.0, 0.3, 1e-9])):
            out = reaction_flow_modified(ctx_for(c), np.zeros(3), 0.0, 0.17)
            assert np.all(out == 0.0)

    def test_compatibility_zero_rk_path(self):
        f = ReactionTerm("custom-polynomial", (0.5, 1.0, 0.0, -1.0))
        ctx = ctx_for([0.2, 1.5], f)
        out = reaction_flow_modified(ctx, np.zeros(2), 0.0, 0.1)
        assert np.all(out == 0.0)

    def test_example_value(self):
        out = reaction_flow_modified(ctx_for(1.0), np.array([1.0]), 0.0, 0.1)[0]
        # w = w_hat + 1 solves w' = w^2 - 1, w(0) = 2  ->  w = coth(arcoth(2) - t)
        expected = 1 / math.tanh(0.5 * math.log(3) - 0.1) - 1
        assert out == pytest.approx(expected, rel=1e-13)
        assert out == pytest.approx(1.37344502, abs=1e-8)

    def test_zero_base_matches_raw(self):
        out = reaction_flow_modified(ctx_for(0.0), np.array([1.0]), 0.0, 0.5)[0]
        assert out == pytest.approx(2.0, rel=1e-15)

    def test_blow_up(self):
        with pytest.raises(BlowUpError):
            reaction_flow_modified(ctx_for(1.0), np.array([10.0]), 0.0, 0.5)

    def test_rejects_non_autonomous(self):
        g = build_grid_1d(0, 1, 4, FaceBC.dirichlet(), FaceBC.dirichlet())
        op = assemble_operator_1d(g, None, FaceBC.dirichlet(0.0), FaceBC.dirichlet(0.0))
        f = ReactionTerm("square", autonomous=False)
        with pytest.raises(ValueError):
            IbcStepContext.build(op, f, np.ones(op.dim), 0.0)

    def test_context(self):
        bl, br = FaceBC.dirichlet(2.0), FaceBC.dirichlet(3.0)
        g = build_grid_1d(0, 1, 3, bl, br)
        op = assemble_operator_1d(g, None, bl, br)
        u = np.array([1.0, 2.0, 3.0])
        ctx = IbcStepContext.build(op, SQUARE, u, 0.0)
        np.testing.assert_allclose(ctx.g_n, op.dense() @ u + op.r + u**2)
        assert np.all(ctx.h(0.0, np.zeros(3)) == 0.0)


def _samples(n=100, seed=11):
    rng = np.random.default_rng(seed)
    w0, c, dt = [], [], []
    while len(w0) < n:
        a, b, t = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.0, 0.2)
        # keep clear of blow-up for both the raw and the shifted flow
        raw_den = 1 - a * t
        k = 2 * b
        mod_den = 1 - a * t * (math.expm1(k * t) / (k * t) if k * t else 1.0)
        if raw_den < 0.1 or mod_den < 0.1:
            continue
        w0.append(a)
        c.append(b)
        dt.append(t)
    return np.array(w0), np.array(c), np.array(dt)


def test_closed_forms_match_rk_oracle():
    w0, c, dt = _samples()
    for i in range(w0.size):
        raw = reaction_flow_raw(SQUARE, w0[i:i + 1], 0.0, dt[i])
        rk_raw = pointwise_rk_flow(lambda t, w: w**2, w0[i:i + 1], 0.0, dt[i])
        assert abs(raw[0] - rk_raw[0]) <= 1e-9
        ci = c[i]
        mod = reaction_flow_modified(ctx_for(ci), w0[i:i + 1], 0.0, dt[i])
        rk_mod = pointwise_rk_flow(lambda t, w: (w + ci) ** 2 - ci**2, w0[i:i + 1], 0.0, dt[i])
        assert abs(mod[0] - rk_mod[0]) <= 1e-9


def test_rk_oracle_against_closed_form_exponential():
    out = pointwise_rk_flow(lambda t, w: -3.0 * w, np.array([1.0, 2.0]), 0.0, 0.7)
    np.testing.assert_allclose(out, np.exp(-2.1) * np.array([1.0, 2.0]), rtol=1e-11)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.0, 0.1), st.floats(0.0, 0.1))
def test_flow_composition(w0, c, dt1, dt2):
    assume(1 - abs(w0) * (dt1 + dt2) * math.exp(4 * (dt1 + dt2)) > 0.2)
    w = np.array([w0])
    whole = reaction_flow_raw(SQUARE, w, 0.0, dt1 + dt2)
    parts = reaction_flow_raw(SQUARE, reaction_flow_raw(SQUARE, w, 0.0, dt1), dt1, dt2)
    np.testing.assert_allclose(parts, whole, rtol=1e-10, atol=1e-14)
    ctx = ctx_for(c)
    whole = reaction_flow_modified(ctx, w, 0.0, dt1 + dt2)
    parts = reaction_flow_modified(ctx, reaction_flow_modified(ctx, w, 0.0, dt1), dt1, dt2)
    np.testing.assert_allclose(parts, whole, rtol=1e-10, atol=1e-14)


def test_consistency_first_order():
    w0 = np.array([0.7, -1.3, 1.9])
    c = np.array([0.4, 1.0, -0.5])
    dts = 1e-2 * 2.0 ** -np.arange(5)
    raw_err, mod_err = [], []
    for dt in dts:
        raw_err.append(np.max(np.abs((reaction_flow_raw(SQUARE, w0, 0.0, dt) - w0) / dt - w0**2)))
        h = (w0 + c) ** 2 - c**2
        mod_err.append(np.max(np.abs((reaction_flow_modified(ctx_for(c), w0, 0.0, dt) - w0) / dt - h)))
    for errs in (raw_err, mod_err):
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)


def test_bernoulli_limit_k_zero():
    np.testing.assert_allclose(bernoulli_flow(1.0, 0.0, np.array([0.5]), 0.4), [0.5 / 0.8], rtol=1e-15)


class TestDiffusionHalfstep:
    def test_zero_dt(self):
        plan = plan_from_matrix(np.array([[-4.0]]))
        assert diffusion_halfstep(None, plan, np.array([2.0]), np.array([5.0]), 0.0)[0] == 2.0

    def test_scalar_decay(self):
        plan = plan_from_matrix(np.array([[-4.0]]))
        out = diffusion_halfstep(None, plan, np.array([2.0]), np.array([0.0]), 0.25)[0]
        assert out == pytest.approx(2 * math.exp(-1), rel=1e-15)
        assert out == pytest.approx(0.7357589, abs=1e-7)

    def test_scalar_affine(self):
        plan = plan_from_matrix(np.array([[-1.0]]))
        out = diffusion_halfstep(None, plan, np.array([0.0]), np.array([1.0]), 1.0)[0]
        assert out == pytest.approx(1 - math.exp(-1), rel=1e-15)

    def test_operator_route(self):
        bl, br = FaceBC.neumann(1.0), FaceBC.dirichlet(2.0)
        g = build_grid_1d(0, 1, 12, bl, br)
        op = assemble_operator_1d(g, None, bl, br)
        v = np.ones(op.dim)
        a = diffusion_halfstep(op, plan_spectral(op), v, op.r, 0.01)
        b = diffusion_halfstep(op, None, v, op.r, 0.01)
        np.testing.assert_allclose(a, b, rtol=1e-11)
