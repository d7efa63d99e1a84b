"""Exact affine flows ``v' = G v + g`` (constant ``g``) for discrete generators.

Two routes are provided:

* a spectral route that symmetrises a tridiagonal generator (or a Kronecker
  sum of two of them) and applies ``exp`` and ``phi1`` mode-wise;
* a dense route through scaling-and-squaring Pade on the full matrix, used as
  the oracle and as the fallback for generators the spectral route rejects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .discretize import DiscreteOperator

PHI1_SERIES_SWITCH = 1e-5
DENSE_MAX_DIM = 4096
# exp(700) is close to the float64 ceiling
_EXP_LIMIT = 700.0


class NotSymmetrizableError(ValueError):
    """Tridiagonal pattern the diagonal similarity transform cannot symmetrise."""


class StabilityError(FloatingPointError):
    """The requested exponential overflows."""


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable singularity handled.

    Below ``|z| < 1e-5`` a four-term Taylor series is used; elsewhere ``expm1``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < PHI1_SERIES_SWITCH
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 * (1.0 + zs / 3.0 * (1.0 + zs / 4.0))
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl
    return out if out.ndim else out[()]


@dataclass(frozen=True, eq=False)
class _Plan1D:
    eigenvalues: np.ndarray
    basis: Optional[np.ndarray]     # orthonormal eigenvectors of the symmetrised matrix; None = identity
    symmetrizer: np.ndarray         # G = S^-1 (Q diag(lam) Q^T) S with S = diag(symmetrizer)

    def forward(self, v, axis=-1):
        shape = [1] * v.ndim
        shape[axis] = -1
        w = v * self.symmetrizer.reshape(shape)
        if self.basis is None:
            return w
        return np.moveaxis(np.tensordot(self.basis.T, w, axes=([1], [axis])), 0, axis)

    def backward(self, y, axis=-1):
        if self.basis is not None:
            y = np.moveaxis(np.tensordot(self.basis, y, axes=([1], [axis])), 0, axis)
        shape = [1] * y.ndim
        shape[axis] = -1
        return y / self.symmetrizer.reshape(shape)


@dataclass(frozen=True, eq=False)
class SpectralPlan:
    """Diagonalisation of a 1D tridiagonal generator or a 2D Kronecker sum.

    For 2D, ``factors = (plan_x, plan_y)`` and the effective spectrum is the
    grid ``mu_j + lambda_i`` laid out like the x-fastest state vector.
    """

    factors: tuple
    shape: tuple
    flags: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> np.ndarray:
        if len(self.factors) == 1:
            return self.factors[0].eigenvalues
        px, py = self.factors
        return (py.eigenvalues[:, None] + px.eigenvalues[None, :]).ravel()

    def forward(self, v: np.ndarray) -> np.ndarray:
        if len(self.factors) == 1:
            return self.factors[0].forward(v)
        px, py = self.factors
        u = v.reshape(self.shape)
        return py.forward(px.forward(u, axis=1), axis=0).ravel()

    def backward(self, y: np.ndarray) -> np.ndarray:
        if len(self.factors) == 1:
            return self.factors[0].backward(y)
        px, py = self.factors
        u = y.reshape(self.shape)
        return py.backward(px.backward(u, axis=1), axis=0).ravel()

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Action of the generator reconstructed from the plan."""
        return self.backward(self.eigenvalues * self.forward(v))

    @lru_cache(maxsize=64)
    def multipliers(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Mode-wise ``exp(t lam)`` and ``t phi1(t lam)``."""
        z = t * self.eigenvalues
        if np.max(z, initial=-np.inf) > _EXP_LIMIT:
            raise StabilityError(f"exp(t*lambda) overflows: t*max(lambda) = {np.max(z):.3g}")
        return np.exp(z), t * phi1(z)


def _plan_tridiagonal(lower, diag, upper) -> _Plan1D:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    diag = np.asarray(diag, dtype=float)
    prod = lower * upper
    both_zero = (lower == 0.0) & (upper == 0.0)
    if np.any((prod <= 0.0) & ~both_zero):
        raise NotSymmetrizableError("off-diagonal products must be positive")
    if np.all(both_zero):
        return _Plan1D(diag.copy(), None, np.ones_like(diag))
    ratio = np.where(both_zero, 1.0, np.sqrt(np.abs(upper) / np.where(both_zero, 1.0, np.abs(lower))))
    # d_{i+1} = d_i sqrt(u_i / l_i), accumulated in log space
    log_s = np.concatenate([[0.0], np.cumsum(np.log(ratio))])
    log_s -= 0.5 * (log_s.max() + log_s.min())
    symmetrizer = np.exp(log_s)
    off = np.sign(upper) * np.sqrt(np.abs(prod))
    lam, q = sla.eigh_tridiagonal(diag, off)
    return _Plan1D(lam, q, symmetrizer)


def plan_spectral(op: DiscreteOperator) -> SpectralPlan:
    """Build the spectral plan of ``op``.

    Raises `NotSymmetrizableError` for generators the similarity transform
    cannot handle; callers then fall back to the dense route.
    """
    if op.kron is not None:
        px = _plan_1d(op.kron.op_x)
        py = _plan_1d(op.kron.op_y)
        shape = (op.kron.op_y.dim, op.kron.op_x.dim)
        return SpectralPlan((px, py), shape, _flags(px, py))
    p = _plan_1d(op)
    return SpectralPlan((p,), (op.dim,), _flags(p))


def _plan_1d(op: DiscreteOperator) -> _Plan1D:
    if op.bands is None:
        raise NotSymmetrizableError("operator carries neither tridiagonal bands nor Kronecker factors")
    return _plan_tridiagonal(*op.bands)


def _flags(*plans) -> dict:
    spread = max(float(p.symmetrizer.max() / p.symmetrizer.min()) for p in plans)
    return {"symmetrizer_spread": spread, "ill_conditioned": spread > 1e8}


def plan_from_matrix(G: np.ndarray) -> SpectralPlan:
    """Plan for an explicit tridiagonal (or diagonal) dense matrix."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if np.any(np.triu(G, 2)) or np.any(np.tril(G, -2)):
        raise NotSymmetrizableError("matrix is not tridiagonal")
    p = _plan_tridiagonal(np.diag(G, -1), np.diag(G), np.diag(G, 1))
    return SpectralPlan((p,), (G.shape[0],), _flags(p))


@dataclass
class AffineFlowResult:
    state: np.ndarray
    backend: str
    flags: dict = field(default_factory=dict)


Generator = Union[DiscreteOperator, np.ndarray, sp.spmatrix]


def _dense(G: Generator) -> np.ndarray:
    if isinstance(G, DiscreteOperator):
        G = G.matrix
    if sp.issparse(G):
        G = G.toarray()
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[0] > DENSE_MAX_DIM:
        raise ValueError(f"dense matrix functions are limited to dim <= {DENSE_MAX_DIM}, got {G.shape[0]}")
    return G


def _dense_affine(G: np.ndarray, v0: np.ndarray, g: np.ndarray, t: float) -> np.ndarray:
    # exp([[tG, t g], [0, 0]]) [v0; 1] = exp(tG) v0 + t phi1(tG) g
    n = G.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = t * G
    aug[:n, n] = t * g
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = sla.expm(aug)
        except FloatingPointError as exc:
            raise StabilityError("dense exponential overflowed") from exc
    out = E[:n, :n] @ v0 + E[:n, n]
    if not np.all(np.isfinite(out)):
        raise StabilityError("dense exponential overflowed")
    return out


def expm_action(plan: Optional[SpectralPlan], G: Generator, t: float, v: np.ndarray) -> np.ndarray:
    """``exp(t G) v``; the dense route is used when ``plan`` is None."""
    if t < 0:
        raise ValueError("t must be non-negative")
    v = np.asarray(v, dtype=float)
    if t == 0:
        return v.copy()
    if plan is not None:
        e, _ = plan.multipliers(float(t))
        return plan.backward(e * plan.forward(v))
    Gd = _dense(G)
    return _dense_affine(Gd, v, np.zeros_like(v), t)


def affine_flow(plan: Optional[SpectralPlan], G: Generator, v0: np.ndarray,
                g: np.ndarray, t: float) -> AffineFlowResult:
    """Exact solution at time ``t`` of ``v' = G v + g``, ``v(0) = v0``.

    ``v(t) = exp(tG) v0 + t phi1(tG) g``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    v0 = np.asarray(v0, dtype=float)
    g = np.asarray(g, dtype=float)
    if v0.shape != g.shape:
        raise ValueError(f"dimension mismatch: v0 {v0.shape} vs g {g.shape}")
    if plan is not None:
        if v0.size != int(np.prod(plan.shape)):
            raise ValueError(f"dimension mismatch: state {v0.size} vs plan {plan.shape}")
        if t == 0:
            return AffineFlowResult(v0.copy(), "spectral", plan.flags)
        e, tp = plan.multipliers(float(t))
        y = e * plan.forward(v0) + tp * plan.forward(g)
        return AffineFlowResult(plan.backward(y), "spectral", plan.flags)
    Gd = _dense(G)
    if Gd.shape[0] != v0.size:
        raise ValueError(f"dimension mismatch: generator {Gd.shape} vs state {v0.shape}")
    if t == 0:
        return AffineFlowResult(v0.copy(), "dense", {})
    return AffineFlowResult(_dense_affine(Gd, v0, g, t), "dense", {})
