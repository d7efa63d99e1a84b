import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve

from ibcsplit.bench.config import preset_spec
from ibcsplit.bench.study import build_problem
from ibcsplit.discretize import DiscreteOperator, FaceBC, assemble_operator_1d, build_grid_1d, full_field_1d
from ibcsplit.flows import BlowUpError, ReactionTerm, reaction_flow_raw
from ibcsplit.integrators import (ReferenceConfig, ReferenceSolverError, SchemeKind, classic_strang_step,
                                  ibc_strang_step, integrate, reference_solve, step_map)
from ibcsplit.opfunc import affine_flow, plan_from_matrix, plan_spectral

SQUARE = ReactionTerm()
ZERO = ReactionTerm.zero()
STEPS = [classic_strang_step, ibc_strang_step]


def scalar_op(value, r=0.0):
    m = sp.csr_matrix(np.array([[float(value)]]))
    return DiscreteOperator(m, np.array([float(r)]), grid=None,
                            bands=(np.empty(0), np.array([float(value)]), np.empty(0)))


def mixed_op(n=24):
    bl, br = FaceBC.neumann(0.7), FaceBC.dirichlet(2.0)
    g = build_grid_1d(0, 1, n, bl, br)
    op = assemble_operator_1d(g, None, bl, br)
    return op, plan_spectral(op)


class TestSchemeKind:
    @pytest.mark.parametrize("name,kind", [("classic", SchemeKind.CLASSIC_STRANG), ("IBC", SchemeKind.IBC_STRANG),
                                           ("ibc_strang", SchemeKind.IBC_STRANG)])
    def test_parse(self, name, kind):
        assert SchemeKind.parse(name) is kind

    def test_round_trip(self):
        for kind in SchemeKind:
            assert SchemeKind.parse(str(kind)) is kind

    def test_unknown(self):
        with pytest.raises(ValueError):
            SchemeKind.parse("lie")

    def test_step_map(self):
        assert step_map("ibc") is ibc_strang_step


class TestClassicStep:
    def test_scalar_composition(self):
        op = scalar_op(-1.0)
        out = classic_strang_step(op, plan_spectral(op), SQUARE, np.array([0.5]), 0.0, 0.1)[0]
        half = math.exp(-0.05)
        expected = half * (half * 0.5) / (1 - 0.1 * half * 0.5)
        assert out == pytest.approx(expected, rel=1e-14)
        assert out == pytest.approx(0.47501, abs=1e-5)

    def test_pure_reaction(self):
        op = scalar_op(0.0)
        u = np.array([0.3])
        out = classic_strang_step(op, plan_spectral(op), SQUARE, u, 0.0, 0.2)
        np.testing.assert_array_equal(out, reaction_flow_raw(SQUARE, u, 0.0, 0.2))


class TestIbcStep:
    def test_scalar_against_rk(self):
        op = scalar_op(-1.0)
        out = ibc_strang_step(op, plan_spectral(op), SQUARE, np.array([0.5]), 0.0, 0.1)[0]
        sol = solve_ivp(lambda t, u: -u + u**2, (0, 0.1), [0.5], method="DOP853", rtol=1e-13, atol=1e-14)
        assert abs(out - sol.y[0, -1]) <= 5e-4

    def test_taylor_consistency(self):
        op, plan = mixed_op()
        u = 1.0 + 0.3 * np.cos(np.linspace(0, 2, op.dim))
        first = op.rhs(u) + SQUARE(0.0, u)
        taus = 1e-5 * 2.0 ** -np.arange(5)
        errs = [np.max(np.abs(ibc_strang_step(op, plan, SQUARE, u, 0.0, t) - u - t * first)) for t in taus]
        slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_stationary_state_is_fixed(self):
        op, plan = mixed_op(16)
        f = ReactionTerm("custom-polynomial", (0.0, -1.0, 0.0, -0.5))
        A = op.dense()

        def residual(u):
            return A @ u + op.r + f(0.0, u)

        u_star = fsolve(residual, np.full(op.dim, 1.5), fprime=lambda u: A + np.diag(f.derivative(u)), xtol=1e-12)
        assert np.max(np.abs(residual(u_star))) < 1e-9
        # polish the residual to round-off with Newton on the exact Jacobian
        for _ in range(3):
            u_star = u_star - np.linalg.solve(A + np.diag(f.derivative(u_star)), residual(u_star))
        out = ibc_strang_step(op, plan, f, u_star, 0.0, 0.05)
        assert np.max(np.abs(out - u_star)) <= 1e-12 * max(1.0, np.max(np.abs(u_star)))

    def test_rejects_non_autonomous(self):
        op = scalar_op(-1.0)
        with pytest.raises(ValueError):
            ibc_strang_step(op, plan_spectral(op), ReactionTerm(autonomous=False), np.array([0.5]), 0.0, 0.1)


@pytest.mark.parametrize("step", STEPS)
def test_zero_reaction_is_exact(step):
    op, plan = mixed_op()
    u = np.sin(np.linspace(0, 3, op.dim))
    for tau in (1e-3, 0.05, 0.4):
        exact = affine_flow(plan, op, u, op.r, tau).state
        out = step(op, plan, ZERO, u, 0.0, tau)
        assert np.max(np.abs(out - exact)) <= 1e-12 * max(1.0, np.max(np.abs(exact)))


@pytest.mark.parametrize("step", STEPS)
def test_identity_without_dynamics(step):
    op = scalar_op(0.0)
    u = np.array([0.37])
    assert step(op, plan_spectral(op), ZERO, u, 0.0, 0.3)[0] == 0.37


@pytest.mark.parametrize("step", STEPS)
def test_rejects_nonpositive_tau(step):
    op = scalar_op(-1.0)
    with pytest.raises(ValueError):
        step(op, plan_spectral(op), SQUARE, np.array([0.5]), 0.0, 0.0)


class TestIntegrate:
    @pytest.mark.parametrize("scheme", ["classic", "ibc"])
    def test_zero_reaction_composes(self, scheme):
        op, plan = mixed_op()
        u0 = 1 + np.linspace(0, 1, op.dim) ** 2
        out = integrate(scheme, op, plan, ZERO, u0, 0.5, 17)
        exact = affine_flow(plan, op, u0, op.r, 0.5).state
        assert np.max(np.abs(out - exact)) <= 1e-11

    def test_single_step(self):
        op, plan = mixed_op()
        u0 = np.ones(op.dim)
        np.testing.assert_array_equal(integrate("ibc", op, plan, SQUARE, u0, 0.1, 1),
                                      ibc_strang_step(op, plan, SQUARE, u0, 0.0, 0.1))

    def test_blow_up_reports_step(self):
        op = scalar_op(0.0)
        # exact solution 1/(1 - t) blows up at t = 1, inside step [6/7, 8/7)
        with pytest.raises(BlowUpError) as info:
            integrate("classic", op, plan_spectral(op), SQUARE, np.array([1.0]), 2.0, 7)
        assert info.value.step == 3

    def test_rejects_zero_steps(self):
        op = scalar_op(-1.0)
        with pytest.raises(ValueError):
            integrate("ibc", op, plan_spectral(op), SQUARE, np.array([1.0]), 1.0, 0)

    def test_dense_path_matches_spectral(self):
        op, plan = mixed_op()
        u0 = np.full(op.dim, 1.5)
        a = integrate("ibc", op, plan, SQUARE, u0, 0.2, 8)
        b = integrate("ibc", op, None, SQUARE, u0, 0.2, 8)
        np.testing.assert_allclose(a, b, rtol=1e-11)


def test_dirichlet_values_in_full_field():
    bl, br = FaceBC.dirichlet(2.0), FaceBC.dirichlet(3.0)
    g = build_grid_1d(0, 1, 9, bl, br)
    op = assemble_operator_1d(g, None, bl, br)
    u = integrate("ibc", op, plan_spectral(op), SQUARE, np.full(op.dim, 2.5), 0.1, 4)
    full = full_field_1d(op, u)
    assert full[0] == 2.0 and full[-1] == 3.0


class TestReferenceSolve:
    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_riccati(self, backend):
        out = reference_solve(scalar_op(0.0), SQUARE, np.array([1.0]), 0.5, backend=backend)
        assert abs(out[0] - 2.0) <= 1e-7

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_exponential(self, backend):
        out = reference_solve(scalar_op(-1.0), ZERO, np.array([1.0]), 1.0, backend=backend)
        assert abs(out[0] - math.exp(-1)) <= 1e-8

    def test_max_steps(self):
        op, _ = mixed_op(60)
        with pytest.raises(ReferenceSolverError):
            reference_solve(op, SQUARE, np.ones(op.dim), 0.5, ReferenceConfig(max_steps=10))

    def test_blow_up(self):
        with pytest.raises((BlowUpError, ReferenceSolverError)):
            reference_solve(scalar_op(0.0), SQUARE, np.array([1.0]), 2.0)

    def test_stats(self):
        _, stats = reference_solve(scalar_op(-1.0), ZERO, np.array([1.0]), 1.0, return_stats=True)
        assert stats["accepted"] > 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ReferenceConfig(abs_tol=0.0)
        with pytest.raises(ValueError):
            ReferenceConfig(max_steps=0)


def _defects(n=63, taus=0.02 * 2.0 ** -np.arange(5)):
    spec = preset_spec("ex5_1", n_interior=(n,))
    prob = build_problem(spec)
    cfg = ReferenceConfig(abs_tol=1e-13, rel_tol=1e-13)
    out = []
    for tau in taus:
        u_tau = reference_solve(prob.op, prob.f, prob.u0, tau, cfg)
        out.append(ibc_strang_step(prob.op, prob.plan, prob.f, prob.u0, 0.0, tau) - u_tau)
    return prob, np.asarray(taus), out


def test_local_defect_structure():
    """The one-step defect is O(tau^2) in the max norm but O(tau^3) after L^{-1}.

    The smoothed defect and the defect away from the boundary show the third
    order; the raw max-norm defect is dominated by a boundary layer.
    """
    prob, taus, defects = _defects()
    A = prob.op.dense()
    raw = [np.max(np.abs(d)) for d in defects]
    smooth = [np.max(np.abs(np.linalg.solve(A, d))) for d in defects]
    interior = [np.max(np.abs(d[16:48])) for d in defects]
    fit = lambda e: np.polyfit(np.log(taus), np.log(e), 1)[0]
    assert fit(raw) == pytest.approx(2.0, abs=0.15)
    assert fit(smooth) >= 2.6
    assert fit(interior) >= 2.8
