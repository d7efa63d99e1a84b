"""Hot loop of the reference solver: adaptive Dormand-Prince 5(4).

The right-hand side is ``u' = A u + r + p(u)`` with ``A`` in CSR form and ``p``
a polynomial applied pointwise. Two implementations share the algorithm:

* ``_dp54_numba``: explicit loops compiled with ``numba.njit``;
* ``_dp54_numpy``: vectorised numpy/scipy, used when numba is unavailable or
  ``IBCSPLIT_DISABLE_NUMBA=1`` is set in the environment.

Step control is the PI controller of Hairer & Wanner (DOPRI5) with the error
measured in the max norm against weights ``atol + rtol * max(|u|, |u_new|)``.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_DISABLED = os.environ.get("IBCSPLIT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
HAVE_NUMBA = numba is not None

# status codes returned by the kernels
OK = 0
MAX_STEPS = 1
STEP_FLOOR = 2
NONFINITE = 3

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO = 0.2 - 0.75 * BETA

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


def default_backend() -> str:
    return "numba" if HAVE_NUMBA and not NUMBA_DISABLED else "numpy"


def _initial_step_numpy(rhs, u, f0, t_end, atol, rtol):
    # Hairer-Wanner starting step heuristic
    sc = atol + rtol * np.abs(u)
    d0 = np.max(np.abs(u) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end)
    f1 = rhs(u + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    dmax = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dmax <= 1e-15 else (0.01 / dmax) ** 0.2
    return min(100 * h0, h1, t_end)


def _dp54_numpy(A, r, coeffs, u0, t_end, atol, rtol, max_steps, h_floor):
    A = sp.csr_matrix(A)
    poly = np.asarray(coeffs, dtype=float)[::-1].copy()

    def rhs(u):
        acc = np.zeros_like(u)
        for c in poly:
            acc = acc * u + c
        return A @ u + r + acc

    u = np.array(u0, dtype=float, copy=True)
    t = 0.0
    if t_end == 0.0:
        return u, 0, 0, OK
    k1 = rhs(u)
    h = _initial_step_numpy(rhs, u, k1, t_end, atol, rtol)
    err_old = 1e-4
    accepted = rejected = 0
    last_rejected = False
    while t < t_end:
        if accepted + rejected >= max_steps:
            return u, accepted, rejected, MAX_STEPS
        if h < h_floor:
            return u, accepted, rejected, STEP_FLOOR
        if t + h > t_end:
            h = t_end - t
        k2 = rhs(u + h * (A21 * k1))
        k3 = rhs(u + h * (A31 * k1 + A32 * k2))
        k4 = rhs(u + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = rhs(u + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = rhs(u + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        u_new = u + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = rhs(u_new)
        e = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
        err = np.max(np.abs(e) / sc)
        if not np.isfinite(err):
            if not np.all(np.isfinite(u)):
                return u, accepted, rejected, NONFINITE
            h *= FAC_MIN
            rejected += 1
            last_rejected = True
            continue
        if err <= 1.0:
            fac = SAFETY * err ** -EXPO * err_old ** BETA if err > 0.0 else FAC_MAX
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if last_rejected:
                fac = min(1.0, fac)
            err_old = max(err, 1e-4)
            t = t_end if t + h >= t_end else t + h
            u = u_new
            k1 = k7
            accepted += 1
            last_rejected = False
            h *= fac
        else:
            h *= max(FAC_MIN, SAFETY * err ** -EXPO)
            rejected += 1
            last_rejected = True
    return u, accepted, rejected, OK


def _rhs_csr(indptr, indices, data, r, coeffs, y, out):
    n = y.shape[0]
    nc = coeffs.shape[0]
    for i in range(n):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * y[indices[jj]]
        p = 0.0
        yi = y[i]
        for m in range(nc - 1, -1, -1):
            p = p * yi + coeffs[m]
        out[i] = acc + r[i] + p


def _dp54_loops(indptr, indices, data, r, coeffs, u0, t_end, atol, rtol, max_steps, h_floor):
    n = u0.shape[0]
    u = u0.copy()
    t = 0.0
    if t_end == 0.0:
        return u, 0, 0, OK

    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    tmp = np.empty(n)
    u_new = np.empty(n)

    _rhs_csr(indptr, indices, data, r, coeffs, u, k1)

    # starting step
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(u[i])
        d0 = max(d0, abs(u[i]) / sc)
        d1 = max(d1, abs(k1[i]) / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, t_end)
    for i in range(n):
        tmp[i] = u[i] + h0 * k1[i]
    _rhs_csr(indptr, indices, data, r, coeffs, tmp, k2)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(u[i])
        d2 = max(d2, abs(k2[i] - k1[i]) / sc)
    d2 /= h0
    dmax = max(d1, d2)
    if dmax <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dmax) ** 0.2
    h = min(100 * h0, h1, t_end)

    err_old = 1e-4
    accepted = 0
    rejected = 0
    last_rejected = False
    while t < t_end:
        if accepted + rejected >= max_steps:
            return u, accepted, rejected, MAX_STEPS
        if h < h_floor:
            return u, accepted, rejected, STEP_FLOOR
        if t + h > t_end:
            h = t_end - t
        for i in range(n):
            tmp[i] = u[i] + h * (A21 * k1[i])
        _rhs_csr(indptr, indices, data, r, coeffs, tmp, k2)
        for i in range(n):
            tmp[i] = u[i] + h * (A31 * k1[i] + A32 * k2[i])
        _rhs_csr(indptr, indices, data, r, coeffs, tmp, k3)
        for i in range(n):
            tmp[i] = u[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs_csr(indptr, indices, data, r, coeffs, tmp, k4)
        for i in range(n):
            tmp[i] = u[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs_csr(indptr, indices, data, r, coeffs, tmp, k5)
        for i in range(n):
            tmp[i] = u[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        _rhs_csr(indptr, indices, data, r, coeffs, tmp, k6)
        for i in range(n):
            u_new[i] = u[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
        _rhs_csr(indptr, indices, data, r, coeffs, u_new, k7)
        err = 0.0
        finite = True
        for i in range(n):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(u[i]), abs(u_new[i]))
            q = abs(e) / sc
            if not np.isfinite(q):
                finite = False
            elif q > err:
                err = q
        if not finite:
            for i in range(n):
                if not np.isfinite(u[i]):
                    return u, accepted, rejected, NONFINITE
            h *= FAC_MIN
            rejected += 1
            last_rejected = True
            continue
        if err <= 1.0:
            if err > 0.0:
                fac = SAFETY * err ** -EXPO * err_old ** BETA
            else:
                fac = FAC_MAX
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if last_rejected:
                fac = min(1.0, fac)
            err_old = max(err, 1e-4)
            if t + h >= t_end:
                t = t_end
            else:
                t = t + h
            for i in range(n):
                u[i] = u_new[i]
                k1[i] = k7[i]
            accepted += 1
            last_rejected = False
            h *= fac
        else:
            h *= max(FAC_MIN, SAFETY * err ** -EXPO)
            rejected += 1
            last_rejected = True
    return u, accepted, rejected, OK


if HAVE_NUMBA:
    _rhs_csr = numba.njit(cache=True)(_rhs_csr)
    _dp54_numba = numba.njit(cache=True)(_dp54_loops)
else:  # pragma: no cover
    _dp54_numba = None


def dp54_integrate(A, r, coeffs, u0, t_end, atol=1e-9, rtol=1e-9, max_steps=5_000_000,
                   h_floor=0.0, backend=None):
    """Integrate ``u' = A u + r + p(u)`` from 0 to ``t_end``.

    Returns ``(u_end, accepted, rejected, status)``.
    """
    backend = backend or default_backend()
    r = np.ascontiguousarray(r, dtype=float)
    u0 = np.ascontiguousarray(u0, dtype=float)
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        A = sp.csr_matrix(A)
        A.sort_indices()
        return _dp54_numba(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                           np.ascontiguousarray(A.data, dtype=float), r, coeffs, u0,
                           float(t_end), float(atol), float(rtol), int(max_steps), float(h_floor))
    if backend == "numpy":
        return _dp54_numpy(A, r, coeffs, u0, float(t_end), float(atol), float(rtol),
                           int(max_steps), float(h_floor))
    raise ValueError(f"unknown backend {backend!r}")
