"""Strang step maps, the constant-step driver and the reference solver."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .discretize import DiscreteOperator
from .flows import (BlowUpError, IbcStepContext, ReactionTerm, diffusion_halfstep,
                    reaction_flow_modified, reaction_flow_raw)
from .opfunc import SpectralPlan


class SchemeKind(enum.Enum):
    CLASSIC_STRANG = "classic"
    IBC_STRANG = "ibc"

    @classmethod
    def parse(cls, name) -> "SchemeKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"classic": cls.CLASSIC_STRANG, "classic_strang": cls.CLASSIC_STRANG,
                   "ibc": cls.IBC_STRANG, "ibc_strang": cls.IBC_STRANG}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; expected 'classic' or 'ibc'") from None

    def __str__(self):
        return self.value


class ReferenceSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReferenceConfig:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_steps: int = 5_000_000
    # smallest admissible step, relative to t_end
    step_floor: float = 1e-12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("reference tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def classic_strang_step(op: DiscreteOperator, plan: Optional[SpectralPlan], f: ReactionTerm,
                        u_n: np.ndarray, t_n: float, tau: float) -> np.ndarray:
    """Half diffusion (with ``r``), full reaction, half diffusion."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    u_star = diffusion_halfstep(op, plan, u_n, op.r, 0.5 * tau)
    w = reaction_flow_raw(f, u_star, t_n, tau)
    return diffusion_halfstep(op, plan, w, op.r, 0.5 * tau)


def ibc_strang_step(op: DiscreteOperator, plan: Optional[SpectralPlan], f: ReactionTerm,
                    u_n: np.ndarray, t_n: float, tau: float) -> np.ndarray:
    """Initial-boundary corrected Strang step.

    The increment ``u - u_n`` starts at zero and obeys homogeneous boundary
    conditions, so ``r`` only enters through the constant source ``g_n``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    ctx = IbcStepContext.build(op, f, u_n, t_n)
    v_hat = diffusion_halfstep(op, plan, np.zeros_like(ctx.u_n), ctx.g_n, 0.5 * tau)
    w_hat = reaction_flow_modified(ctx, v_hat, t_n, tau)
    u_hat = diffusion_halfstep(op, plan, w_hat, ctx.g_n, 0.5 * tau)
    return ctx.u_n + u_hat


_STEPS = {
    SchemeKind.CLASSIC_STRANG: classic_strang_step,
    SchemeKind.IBC_STRANG: ibc_strang_step,
}


def step_map(scheme):
    return _STEPS[SchemeKind.parse(scheme)]


def integrate(scheme, op: DiscreteOperator, plan: Optional[SpectralPlan], f: ReactionTerm,
              u0: np.ndarray, t_end: float, n_steps: int) -> np.ndarray:
    """Apply ``n_steps`` constant steps of ``scheme`` from ``t = 0``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    step = step_map(scheme)
    tau = t_end / n_steps
    u = np.asarray(u0, dtype=float)
    for n in range(n_steps):
        try:
            u = step(op, plan, f, u, n * tau, tau)
        except BlowUpError as exc:
            raise BlowUpError(f"step {n}: {exc}", index=exc.index, step=n) from exc
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite state after step {n}", step=n)
    return u


def reference_solve(op: DiscreteOperator, f: ReactionTerm, u0: np.ndarray, t_end: float,
                    cfg: Optional[ReferenceConfig] = None, backend: Optional[str] = None,
                    return_stats: bool = False):
    """Adaptive Dormand-Prince 5(4) solution of ``u' = L u + r + f(u)`` at ``t_end``."""
    cfg = cfg or ReferenceConfig()
    if not f.autonomous:
        raise ValueError("the reference kernel handles autonomous reactions only")
    u, accepted, rejected, status = kernels.dp54_integrate(
        op.matrix, op.r, f.coeffs, u0, t_end, cfg.abs_tol, cfg.rel_tol, cfg.max_steps,
        cfg.step_floor * t_end, backend=backend)
    if status == kernels.MAX_STEPS:
        raise ReferenceSolverError(f"reference solver exceeded max_steps={cfg.max_steps}")
    if status == kernels.STEP_FLOOR:
        raise ReferenceSolverError("reference step size fell below the floor (stiffness stall or blow-up)")
    if status == kernels.NONFINITE:
        raise BlowUpError("reference solution became non-finite")
    if return_stats:
        return u, {"accepted": int(accepted), "rejected": int(rejected),
                   "backend": backend or kernels.default_backend()}
    return u
