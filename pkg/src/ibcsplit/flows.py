"""Split subflows: affine diffusion with a source, raw and shifted reaction.

Reaction terms are polynomials in ``u`` evaluated pointwise. Quadratics with
no constant term reduce to a Bernoulli equation ``w' = a w^2 + k w`` whose
flow is

    w(t) = w0 exp(k t) / (1 - a w0 t phi1(k t)),

and the shifted nonlinearity ``f(w + c) - f(c)`` of any quadratic has exactly
that form with ``k = 2 a c + b``. Everything else goes through an adaptive
embedded Runge-Kutta solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .discretize import DiscreteOperator
from .opfunc import SpectralPlan, affine_flow, phi1

RK_TOL = 1e-12

REACTION_KINDS = ("square", "logistic", "custom-polynomial")


class BlowUpError(ArithmeticError):
    """Finite-time blow-up of a reaction flow or of a time integration."""

    def __init__(self, message: str, index: Optional[int] = None, step: Optional[int] = None):
        super().__init__(message)
        self.index = index
        self.step = step


@dataclass(frozen=True)
class ReactionTerm:
    """Pointwise polynomial reaction ``f(u) = sum_k coeffs[k] u^k``.

    kinds:
      ``square``             f = u^2 (no params)
      ``logistic``           params ``(rate, capacity)``: f = rate u (1 - u / capacity)
      ``custom-polynomial``  params are ascending coefficients
    """

    kind: str = "square"
    params: tuple = ()
    autonomous: bool = True

    def __post_init__(self):
        if self.kind not in REACTION_KINDS:
            raise ValueError(f"unknown reaction kind {self.kind!r}; expected one of {REACTION_KINDS}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "square" and self.params:
            raise ValueError("square reaction takes no parameters")
        if self.kind == "logistic":
            if len(self.params) != 2 or self.params[1] == 0.0:
                raise ValueError("logistic reaction needs (rate, capacity) with capacity != 0")
        if self.kind == "custom-polynomial" and not self.params:
            raise ValueError("custom-polynomial needs at least one coefficient")

    @classmethod
    def zero(cls) -> "ReactionTerm":
        return cls("custom-polynomial", (0.0,))

    @property
    def coeffs(self) -> np.ndarray:
        if self.kind == "square":
            c = [0.0, 0.0, 1.0]
        elif self.kind == "logistic":
            rate, cap = self.params
            c = [0.0, rate, -rate / cap]
        else:
            c = list(self.params)
        c = np.asarray(c, dtype=float)
        # trailing zeros do not change the polynomial
        while c.size > 1 and c[-1] == 0.0:
            c = c[:-1]
        return c

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def has_closed_form(self) -> bool:
        c = self.coeffs
        return c.size <= 3 and c[0] == 0.0

    def __call__(self, t, u):
        u = np.asarray(u, dtype=float)
        acc = np.zeros_like(u)
        for c in self.coeffs[::-1]:
            acc = acc * u + c
        return acc

    def derivative(self, u):
        c = self.coeffs
        u = np.asarray(u, dtype=float)
        acc = np.zeros_like(u)
        for k in range(c.size - 1, 0, -1):
            acc = acc * u + k * c[k]
        return acc

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


def bernoulli_flow(a, k, w0, dt):
    """Flow of ``w' = a w^2 + k w`` over ``dt`` (arrays broadcast).

    Raises `BlowUpError` if any component blows up within ``dt``.
    """
    w0 = np.asarray(w0, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), w0.shape)
    k = np.broadcast_to(np.asarray(k, dtype=float), w0.shape)
    denom = 1.0 - a * w0 * dt * phi1(k * dt)
    bad = ~(denom > 0.0)
    if np.any(bad):
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise BlowUpError(f"reaction flow blows up within dt={dt:g} at component {idx}", index=idx)
    return w0 * np.exp(k * dt) / denom


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def pointwise_rk_flow(rhs: Callable, w0, t0: float, dt: float, tol: float = RK_TOL,
                      max_steps: int = 100_000) -> np.ndarray:
    """Adaptive Dormand-Prince solve of the decoupled system ``w' = rhs(t, w)``.

    All components share a step; the error is measured in the max norm with
    weights ``tol * (1 + |w|)``.
    """
    w = np.array(w0, dtype=float, copy=True)
    if dt == 0:
        return w
    t, t_end = t0, t0 + dt
    h = min(dt, 1e-3 * max(dt, 1.0))
    k = [None] * 7
    k[0] = rhs(t, w)
    for _ in range(max_steps):
        if t >= t_end:
            return w
        last = t + h >= t_end
        if last:
            h = t_end - t
        for s in range(1, 7):
            ws = w + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
            k[s] = rhs(t + _C[s] * h, ws)
        w_new = ws  # row 7 of the tableau is the 5th-order solution (FSAL)
        err_vec = h * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        scale = tol * (1.0 + np.maximum(np.abs(w), np.abs(w_new)))
        err = float(np.max(np.abs(err_vec) / scale)) if w.size else 0.0
        if not np.isfinite(err) or not np.all(np.isfinite(w_new)):
            err = np.inf
        if err <= 1.0:
            t = t_end if last else t + h
            w = w_new
            k[0] = k[6]
            fac = 0.9 * err ** -0.2 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
        else:
            h *= max(0.1, 0.9 * err ** -0.2) if np.isfinite(err) else 0.1
        if h < 1e-14 * max(abs(t_end), 1.0):
            raise BlowUpError(f"step size underflow at t={t:g} (likely blow-up)")
    raise RuntimeError("pointwise_rk_flow: max_steps exceeded")


def reaction_flow_raw(f: ReactionTerm, w0, t0: float, dt: float) -> np.ndarray:
    """Flow of ``w' = f(t, w)`` over ``dt``, pointwise."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    w0 = np.asarray(w0, dtype=float)
    if dt == 0:
        return w0.copy()
    if f.has_closed_form:
        c = np.pad(f.coeffs, (0, 3 - f.coeffs.size))
        return bernoulli_flow(c[2], c[1], w0, dt)
    return pointwise_rk_flow(f, w0, t0, dt)


@dataclass(frozen=True, eq=False)
class IbcStepContext:
    """Per-step data of the corrected splitting around the base state ``u_n``.

    ``g_n = L u_n + r + f(t_n, u_n)`` is the constant source of the diffusion
    subflow; ``h(t, w) = f(t, w + u_n) - f(t, u_n)`` the shifted reaction.
    """

    u_n: np.ndarray
    g_n: np.ndarray
    f: ReactionTerm
    f_un: np.ndarray

    @classmethod
    def build(cls, op: DiscreteOperator, f: ReactionTerm, u_n: np.ndarray, t_n: float) -> "IbcStepContext":
        if not f.autonomous:
            raise ValueError("the corrected splitting requires an autonomous reaction term")
        u_n = np.asarray(u_n, dtype=float)
        f_un = f(t_n, u_n)
        return cls(u_n, op.rhs(u_n) + f_un, f, f_un)

    def h(self, t, w):
        return self.f(t, w + self.u_n) - self.f_un


def reaction_flow_modified(ctx: IbcStepContext, w0, t0: float, dt: float) -> np.ndarray:
    """Flow of ``w' = h(t, w)``; zero stays exactly zero."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    w0 = np.asarray(w0, dtype=float)
    if dt == 0:
        return w0.copy()
    coeffs = ctx.f.coeffs
    if coeffs.size <= 3:
        c = np.pad(coeffs, (0, 3 - coeffs.size))
        return bernoulli_flow(c[2], 2.0 * c[2] * ctx.u_n + c[1], w0, dt)
    out = pointwise_rk_flow(ctx.h, w0, t0, dt)
    # h(t, 0) = 0, so zero components are fixed points
    out[w0 == 0.0] = 0.0
    return out


def diffusion_halfstep(op: DiscreteOperator, plan: Optional[SpectralPlan], v0, extra_source, dt: float) -> np.ndarray:
    """Exact flow of ``v' = L v + extra_source`` over ``dt``."""
    return affine_flow(plan, op, v0, extra_source, dt).state
