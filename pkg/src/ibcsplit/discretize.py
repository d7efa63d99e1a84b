"""Uniform grids and second-order finite-difference elliptic operators.

The semi-discrete problem produced here always has the affine form

    u' = L u + r + f(t, u)

where ``L`` acts on the unknown vector under homogeneous boundary conditions
and ``r`` collects every contribution of the boundary data. Faces carry an
oblique condition ``beta * du/dx_k + alpha * u = b`` with the derivative taken
in the face-normal *coordinate* direction (not the outward normal).

Dirichlet faces exclude their boundary nodes from the unknowns, derivative
faces (Neumann/Robin) keep them and eliminate a ghost node.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]

SIDES_1D = ("left", "right")
SIDES_2D = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class FaceBC:
    """Boundary condition ``beta * du/dx + alpha * u = data`` on one face.

    ``data`` is a scalar, an array of per-node samples along a 2D face, or
    ``None`` when it still has to be filled (see `boundary_data_from_trace`).
    """

    alpha: float
    beta: float
    data: Optional[Union[float, np.ndarray]] = None

    def __post_init__(self):
        if self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("degenerate boundary condition: alpha = beta = 0")

    @property
    def is_dirichlet(self) -> bool:
        return self.beta == 0.0

    @property
    def kind(self) -> str:
        if self.beta == 0.0:
            return "dirichlet"
        if self.alpha == 0.0:
            return "neumann"
        return "robin"

    def with_data(self, data) -> "FaceBC":
        return replace(self, data=data)

    @classmethod
    def dirichlet(cls, value=None) -> "FaceBC":
        return cls(1.0, 0.0, value)

    @classmethod
    def neumann(cls, value=None) -> "FaceBC":
        return cls(0.0, 1.0, value)

    @classmethod
    def robin(cls, alpha=1.0, beta=1.0, value=None) -> "FaceBC":
        return cls(alpha, beta, value)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[x_min, x_max]``.

    Nodes are ``x_min + i*h`` for ``i = 0 .. segments``; the unknowns are the
    interior nodes plus any boundary node whose face is not Dirichlet.
    """

    x_min: float
    x_max: float
    n_unknowns: int
    h: float
    includes_left: bool
    includes_right: bool

    @property
    def segments(self) -> int:
        return self.n_unknowns + 1 - int(self.includes_left) - int(self.includes_right)

    @property
    def n_interior(self) -> int:
        return self.segments - 1

    @property
    def nodes(self) -> np.ndarray:
        """Coordinates of the unknowns."""
        first = 0 if self.includes_left else 1
        idx = np.arange(first, first + self.n_unknowns)
        return self.x_min + idx * self.h

    @property
    def all_nodes(self) -> np.ndarray:
        return self.x_min + np.arange(self.segments + 1) * self.h


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; unknowns are ordered row-major with x varying fastest.

    A state vector ``u`` of length ``nx*ny`` reshapes to ``(ny, nx)`` with
    ``u.reshape(ny, nx)[j, i]`` living at ``(grid_x.nodes[i], grid_y.nodes[j])``.
    """

    grid_x: Grid1D
    grid_y: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_y.n_unknowns, self.grid_x.n_unknowns)

    @property
    def n_unknowns(self) -> int:
        return self.grid_x.n_unknowns * self.grid_y.n_unknowns

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.grid_x.nodes, self.grid_y.nodes, indexing="xy")


@dataclass(frozen=True)
class EllipticCoefficients1D:
    """Coefficients of ``(a u')' + c u' + d u``; scalars or vectorised callables."""

    a: Coefficient = 1.0
    c: Coefficient = 0.0
    d: Coefficient = 0.0

    @staticmethod
    def _sample(coef, x):
        if callable(coef):
            return np.asarray(coef(x), dtype=float) * np.ones_like(x)
        return np.full_like(x, float(coef))

    def sample(self, name: str, x: np.ndarray) -> np.ndarray:
        return self._sample(getattr(self, name), np.asarray(x, dtype=float))


@dataclass(frozen=True)
class KroneckerFactors:
    """1D factors of a Kronecker-sum operator ``I_y (x) L_x + L_y (x) I_x``."""

    op_x: "DiscreteOperator"
    op_y: "DiscreteOperator"


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Matrix action ``L`` plus boundary inhomogeneity ``r``.

    ``bands`` holds ``(lower, diag, upper)`` for 1D tridiagonal operators;
    ``kron`` is populated for separable 2D operators.
    """

    matrix: sp.csr_matrix
    r: np.ndarray
    grid: Union[Grid1D, Grid2D]
    bands: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    kron: Optional[KroneckerFactors] = None
    faces: Mapping[str, FaceBC] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def rhs(self, u: np.ndarray) -> np.ndarray:
        """Linear part of the semi-discrete right-hand side, ``L u + r``."""
        return self.matrix @ u + self.r

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def with_r(self, r: np.ndarray) -> "DiscreteOperator":
        return replace(self, r=np.asarray(r, dtype=float))

    def homogeneous(self) -> "DiscreteOperator":
        return self.with_r(np.zeros(self.dim))


def build_grid_1d(x_min: float, x_max: float, n_interior: int,
                  bc_left: FaceBC, bc_right: FaceBC) -> Grid1D:
    """Uniform grid with ``n_interior + 1`` segments.

    Examples
    --------
    >>> g = build_grid_1d(0.0, 1.0, 3, FaceBC.dirichlet(), FaceBC.dirichlet())
    >>> g.h, g.n_unknowns
    (0.25, 3)
    """
    if not x_max > x_min:
        raise ValueError(f"empty interval [{x_min}, {x_max}]")
    if n_interior < 2:
        raise ValueError(f"n_interior must be >= 2, got {n_interior}")
    inc_l = not bc_left.is_dirichlet
    inc_r = not bc_right.is_dirichlet
    h = (x_max - x_min) / (n_interior + 1)
    return Grid1D(float(x_min), float(x_max), n_interior + int(inc_l) + int(inc_r), h, inc_l, inc_r)


def build_grid_2d(x_range: tuple[float, float], y_range: tuple[float, float],
                  nx_interior: int, ny_interior: int,
                  faces: Mapping[str, FaceBC]) -> Grid2D:
    gx = build_grid_1d(*x_range, nx_interior, faces["left"], faces["right"])
    gy = build_grid_1d(*y_range, ny_interior, faces["bottom"], faces["top"])
    return Grid2D(gx, gy)


def _face_value(bc: FaceBC) -> float:
    if bc.data is None:
        return 0.0
    value = np.asarray(bc.data, dtype=float)
    if value.ndim != 0:
        raise ValueError("1D faces take scalar boundary data")
    return float(value)


def _boundary_stencil_1d(grid: Grid1D, coeffs: EllipticCoefficients1D,
                         bc_left: FaceBC, bc_right: FaceBC):
    """Tridiagonal bands plus the r-coefficients of unit data on each face.

    Returns ``(lower, diag, upper, r_left, r_right)`` where ``r_left`` is the
    inhomogeneity produced by ``b_left = 1`` (and ``b_right = 0``).
    """
    h = grid.h
    x = grid.nodes
    n = grid.n_unknowns

    a_plus = coeffs.sample("a", x + 0.5 * h)
    a_minus = coeffs.sample("a", x - 0.5 * h)
    a_nodes = coeffs.sample("a", grid.all_nodes)
    c = coeffs.sample("c", x)
    d = coeffs.sample("d", x)
    if np.any(a_nodes <= 0.0) or np.any(a_plus[:-1] <= 0.0) or np.any(a_minus[1:] <= 0.0):
        raise ValueError("diffusion coefficient a(x) must be positive on the closed domain")

    # half-nodes outside the domain only arise at ghost-eliminated faces;
    # use linear extrapolation from inside so callables need not be defined there
    if grid.includes_left:
        a_minus[0] = 2.0 * a_nodes[0] - a_plus[0]
    if grid.includes_right:
        a_plus[-1] = 2.0 * a_nodes[-1] - a_minus[-1]
    if np.any(a_minus <= 0.0) or np.any(a_plus <= 0.0):
        raise ValueError("diffusion coefficient too steep at a derivative face")

    cm = a_minus / h**2 - c / (2 * h)  # weight of u_{i-1}
    cp = a_plus / h**2 + c / (2 * h)   # weight of u_{i+1}
    diag = -(a_plus + a_minus) / h**2 + d
    lower = cm[1:].copy()
    upper = cp[:-1].copy()
    r_left = np.zeros(n)
    r_right = np.zeros(n)

    if bc_left.is_dirichlet:
        r_left[0] = cm[0] / bc_left.alpha
    else:
        # beta (u_1 - u_-1) / 2h + alpha u_0 = b
        s = 2 * h / bc_left.beta
        diag[0] += cm[0] * s * bc_left.alpha
        upper[0] += cm[0]
        r_left[0] = -cm[0] * s

    if bc_right.is_dirichlet:
        r_right[-1] = cp[-1] / bc_right.alpha
    else:
        # beta (u_N+1 - u_N-1) / 2h + alpha u_N = b
        s = 2 * h / bc_right.beta
        diag[-1] -= cp[-1] * s * bc_right.alpha
        lower[-1] += cp[-1]
        r_right[-1] = cp[-1] * s

    return lower, diag, upper, r_left, r_right


def assemble_operator_1d(grid: Grid1D, coeffs: Optional[EllipticCoefficients1D],
                         bc_left: FaceBC, bc_right: FaceBC) -> DiscreteOperator:
    """Conservative centred differences for ``(a u')' + c u' + d u``.

    Derivative faces use second-order ghost-node elimination.
    """
    if grid.includes_left == bc_left.is_dirichlet or grid.includes_right == bc_right.is_dirichlet:
        raise ValueError("grid node inclusion does not match the boundary conditions")
    coeffs = coeffs or EllipticCoefficients1D()
    lower, diag, upper, r_left, r_right = _boundary_stencil_1d(grid, coeffs, bc_left, bc_right)
    matrix = sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")
    r = _face_value(bc_left) * r_left + _face_value(bc_right) * r_right
    return DiscreteOperator(matrix, r, grid, bands=(lower, diag, upper),
                            faces={"left": bc_left, "right": bc_right})


def _face_samples(bc: FaceBC, n: int) -> np.ndarray:
    if bc.data is None:
        return np.zeros(n)
    data = np.asarray(bc.data, dtype=float)
    if data.ndim == 0:
        return np.full(n, float(data))
    if data.shape != (n,):
        raise ValueError(f"face data has shape {data.shape}, expected ({n},)")
    return data


def assemble_laplacian_2d(grid: Grid2D, faces: Mapping[str, FaceBC],
                          diffusivity: float = 1.0) -> DiscreteOperator:
    """Five-point Laplacian with Kronecker-sum factors attached.

    The matrix and ``r`` come from a direct node-by-node stencil assembly;
    ``kron`` carries the 1D factors built independently.
    """
    if callable(diffusivity) or np.ndim(diffusivity) != 0:
        raise NotImplementedError("2D operators support a constant diffusivity only")
    missing = set(SIDES_2D) - set(faces)
    if missing:
        raise ValueError(f"missing faces: {sorted(missing)}")
    for side, bc in faces.items():
        if side not in SIDES_2D:
            raise ValueError(f"unknown face {side!r}")
        if np.ndim(bc.alpha) or np.ndim(bc.beta):
            raise NotImplementedError("spatially varying face coefficients are not separable")

    coeffs = EllipticCoefficients1D(a=float(diffusivity))
    fl, fr, fb, ft = (faces[s] for s in SIDES_2D)
    op_x = assemble_operator_1d(grid.grid_x, coeffs, fl.with_data(None), fr.with_data(None))
    op_y = assemble_operator_1d(grid.grid_y, coeffs, fb.with_data(None), ft.with_data(None))

    matrix, r = _assemble_five_point(grid, faces, float(diffusivity))
    return DiscreteOperator(matrix, r, grid, kron=KroneckerFactors(op_x, op_y), faces=dict(faces))


def _assemble_five_point(grid: Grid2D, faces: Mapping[str, FaceBC], a: float):
    gx, gy = grid.grid_x, grid.grid_y
    nx, ny = gx.n_unknowns, gy.n_unknowns
    data_l = _face_samples(faces["left"], ny)
    data_r = _face_samples(faces["right"], ny)
    data_b = _face_samples(faces["bottom"], nx)
    data_t = _face_samples(faces["top"], nx)

    rows, cols, vals = [], [], []
    r = np.zeros(nx * ny)

    def axis_terms(i, n, h, lo_bc, hi_bc, lo_data, hi_data, index):
        # contributions along one axis for node position i of n
        w = a / h**2
        terms = [(index(i), -2 * w)]
        rhs = 0.0
        if i > 0:
            terms.append((index(i - 1), w))
        elif lo_bc.is_dirichlet:
            rhs += w * lo_data / lo_bc.alpha
        else:
            s = 2 * h / lo_bc.beta
            terms.append((index(i + 1), w))
            terms.append((index(i), w * s * lo_bc.alpha))
            rhs -= w * s * lo_data
        if i < n - 1:
            terms.append((index(i + 1), w))
        elif hi_bc.is_dirichlet:
            rhs += w * hi_data / hi_bc.alpha
        else:
            s = 2 * h / hi_bc.beta
            terms.append((index(i - 1), w))
            terms.append((index(i), -w * s * hi_bc.alpha))
            rhs += w * s * hi_data
        return terms, rhs

    for j in range(ny):
        for i in range(nx):
            k = j * nx + i
            tx, rx = axis_terms(i, nx, gx.h, faces["left"], faces["right"],
                                data_l[j], data_r[j], lambda m: j * nx + m)
            ty, ry = axis_terms(j, ny, gy.h, faces["bottom"], faces["top"],
                                data_b[i], data_t[i], lambda m: m * nx + i)
            for col, val in tx + ty:
                rows.append(k)
                cols.append(col)
                vals.append(val)
            r[k] = rx + ry

    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    matrix.sum_duplicates()
    return matrix, r


def kronecker_matrix(kron: KroneckerFactors) -> sp.csr_matrix:
    """``I_y (x) L_x + L_y (x) I_x`` for x-fastest ordering."""
    nx, ny = kron.op_x.dim, kron.op_y.dim
    return (sp.kron(sp.identity(ny), kron.op_x.matrix)
            + sp.kron(kron.op_y.matrix, sp.identity(nx))).tocsr()


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form scalar field with its first partial derivatives.

    Callables take ``x`` (1D) or ``x, y`` (2D) arrays.
    """

    value: Callable
    dx: Callable
    dy: Optional[Callable] = None

    @property
    def dimension(self) -> int:
        return 1 if self.dy is None else 2


def boundary_data_from_trace(u0: AnalyticField, faces: Mapping[str, FaceBC],
                             grid: Optional[Grid2D] = None) -> dict[str, FaceBC]:
    """Fill face data with ``alpha * u0 + beta * du0/dn`` evaluated on each face.

    In 2D the data are sampled at the face's unknown coordinates, so ``grid``
    is required there.

    Examples
    --------
    >>> import numpy as np
    >>> u0 = AnalyticField(lambda x: 2 + np.sin(np.pi * x / 2),
    ...                    lambda x: np.pi / 2 * np.cos(np.pi * x / 2))
    >>> out = boundary_data_from_trace(u0, {"left": FaceBC.dirichlet(), "right": FaceBC.dirichlet()})
    >>> float(out["left"].data), float(out["right"].data)
    (2.0, 3.0)
    """
    out = {}
    if u0.dimension == 1:
        ends = {"left": None, "right": None}
        for side in faces:
            if side not in ends:
                raise ValueError(f"unknown 1D face {side!r}")
        x0, x1 = (0.0, 1.0) if grid is None else (grid.x_min, grid.x_max)
        for side, bc in faces.items():
            x = np.asarray(x0 if side == "left" else x1, dtype=float)
            out[side] = bc.with_data(float(bc.alpha * u0.value(x) + bc.beta * u0.dx(x)))
        return out

    if grid is None:
        raise ValueError("2D traces need the grid to sample face nodes")
    gx, gy = grid.grid_x, grid.grid_y
    for side, bc in faces.items():
        if side in ("left", "right"):
            y = gy.nodes
            x = np.full_like(y, gx.x_min if side == "left" else gx.x_max)
            deriv = u0.dx(x, y)
        elif side in ("bottom", "top"):
            x = gx.nodes
            y = np.full_like(x, gy.x_min if side == "bottom" else gy.x_max)
            deriv = u0.dy(x, y)
        else:
            raise ValueError(f"unknown 2D face {side!r}")
        out[side] = bc.with_data(np.asarray(bc.alpha * u0.value(x, y) + bc.beta * deriv, dtype=float))
    return out


def full_field_1d(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    """Values on every grid node, with Dirichlet nodes set to ``b / alpha``."""
    grid = op.grid
    out = np.empty(grid.segments + 1)
    first = 0 if grid.includes_left else 1
    out[first:first + grid.n_unknowns] = u
    left, right = op.faces["left"], op.faces["right"]
    if left.is_dirichlet:
        out[0] = _face_value(left) / left.alpha
    if right.is_dirichlet:
        out[-1] = _face_value(right) / right.alpha
    return out
