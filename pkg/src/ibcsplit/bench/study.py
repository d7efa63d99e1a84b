"""Convergence studies: build the problem, get a reference, sweep step sizes."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from ..discretize import (DiscreteOperator, FaceBC, assemble_laplacian_2d, assemble_operator_1d,
                          boundary_data_from_trace, build_grid_1d, build_grid_2d)
from ..flows import BlowUpError, ReactionTerm
from ..integrators import SchemeKind, integrate, reference_solve
from ..opfunc import DENSE_MAX_DIM, NotSymmetrizableError, SpectralPlan, plan_spectral
from .cache import ReferenceCache, spec_digest
from .config import ExperimentSpec
from .presets import get_preset

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-12
TAIL_WINDOW = 4
SOLVER_TAG = "dopri54-pi-maxnorm/1"


@dataclass(frozen=True, eq=False)
class Problem:
    op: DiscreteOperator
    plan: Optional[SpectralPlan]
    f: ReactionTerm
    u0: np.ndarray
    faces: dict


def resolve_faces(spec: ExperimentSpec, grid=None) -> dict[str, FaceBC]:
    """Face conditions with data filled from the trace, the preset, or the config."""
    preset = get_preset(spec.preset)
    bare = {side: FaceBC(fs.alpha, fs.beta) for side, fs in spec.faces.items()}
    traced = boundary_data_from_trace(preset.u0, bare, grid)
    out = {}
    for side, fs in spec.faces.items():
        if fs.data == "from_trace":
            out[side] = traced[side]
        elif fs.data == "literal":
            out[side] = bare[side].with_data(float(preset.literal_data[side]))
        elif isinstance(fs.data, tuple):
            out[side] = bare[side].with_data(np.asarray(fs.data, dtype=float))
        else:
            out[side] = bare[side].with_data(float(fs.data))
    return out


def build_problem(spec: ExperimentSpec, reaction: Optional[ReactionTerm] = None) -> Problem:
    preset = get_preset(spec.preset)
    bare = {side: FaceBC(fs.alpha, fs.beta) for side, fs in spec.faces.items()}
    if spec.dimension == 1:
        grid = build_grid_1d(0.0, 1.0, spec.n_interior[0], bare["left"], bare["right"])
        faces = resolve_faces(spec)
        op = assemble_operator_1d(grid, None, faces["left"], faces["right"])
        u0 = preset.u0.value(grid.nodes)
    else:
        grid = build_grid_2d((0.0, 1.0), (0.0, 1.0), spec.n_interior[0], spec.n_interior[1], bare)
        faces = resolve_faces(spec, grid)
        op = assemble_laplacian_2d(grid, faces)
        X, Y = grid.mesh()
        u0 = preset.u0.value(X, Y).ravel()
    try:
        plan = plan_spectral(op)
    except NotSymmetrizableError:
        if op.dim > DENSE_MAX_DIM:
            raise
        log.info("spectral plan unavailable, using dense matrix functions")
        plan = None
    return Problem(op, plan, reaction or spec.reaction, np.asarray(u0, dtype=float), faces)


def reference_digest(spec: ExperimentSpec, problem: Problem, reaction: ReactionTerm) -> str:
    faces = {side: {"alpha": bc.alpha, "beta": bc.beta,
                    "data": np.atleast_1d(np.asarray(bc.data, dtype=float)).tolist()}
             for side, bc in problem.faces.items()}
    payload = {
        "solver": SOLVER_TAG,
        "dimension": spec.dimension,
        "n_interior": list(spec.n_interior),
        "faces": faces,
        "reaction": reaction.to_dict(),
        "initial": {"preset": spec.preset, "params": dict(spec.preset_params)},
        "t_end": spec.t_end,
        "abs_tol": spec.reference.abs_tol,
        "rel_tol": spec.reference.rel_tol,
    }
    return spec_digest(payload)


def estimate_order(pairs: Sequence[tuple[float, Optional[float]]], tail: int = TAIL_WINDOW,
                   floor: float = ERROR_FLOOR):
    """Pairwise orders between consecutive entries and a least-squares tail slope.

    Entries with error ``None`` or at/below ``floor`` are inadmissible: their
    pairwise orders are ``None`` and they are left out of the fit.

    >>> estimate_order([(0.1, 0.04), (0.05, 0.01)])[0]
    [None, 2.0]
    """
    def ok(e):
        return e is not None and math.isfinite(e) and e > floor

    admissible = [(t, e) for t, e in pairs if ok(e)]
    if len(admissible) < 2:
        raise ValueError("need at least two step sizes with errors above the floor")
    orders = [None]
    for (t0, e0), (t1, e1) in zip(pairs, pairs[1:]):
        orders.append(math.log(e0 / e1) / math.log(t0 / t1) if ok(e0) and ok(e1) else None)
    window = sorted(admissible, key=lambda p: p[0])[:tail]
    x = np.log([t for t, _ in window])
    y = np.log([e for _, e in window])
    slope = float(np.polyfit(x, y, 1)[0])
    return orders, slope


@dataclass
class SchemeResult:
    scheme: str
    taus: list[float]
    errors: list[Optional[float]]
    pairwise_orders: list[Optional[float]] = field(default_factory=list)
    tail_slope: Optional[float] = None
    failures: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def pairs(self):
        return list(zip(self.taus, self.errors))


@dataclass
class ConvergenceReport:
    name: str
    results: dict[str, SchemeResult]
    metadata: dict = field(default_factory=dict)

    def tail_slopes(self) -> dict[str, Optional[float]]:
        return {k: r.tail_slope for k, r in self.results.items()}


def get_reference(spec: ExperimentSpec, problem: Problem, cache: Optional[ReferenceCache] = None):
    """Reference endpoint from the cache or a fresh solve; returns ``(u, info)``."""
    digest = reference_digest(spec, problem, problem.f)
    info = {"digest": digest, "cache_hit": False}
    if cache is not None:
        hit = cache.lookup(digest)
        if hit is not None and hit.shape == problem.u0.shape:
            info["cache_hit"] = True
            info["wall_time"] = 0.0
            return hit, info
    t0 = time.perf_counter()
    u_ref, stats = reference_solve(problem.op, problem.f, problem.u0, spec.t_end, spec.reference,
                                   return_stats=True)
    info["wall_time"] = time.perf_counter() - t0
    info.update(stats)
    if cache is not None:
        cache.store(digest, u_ref, {"abs_tol": spec.reference.abs_tol,
                                    "rel_tol": spec.reference.rel_tol,
                                    "t_end": spec.t_end, "solver": SOLVER_TAG})
    return u_ref, info


def run_convergence_study(spec: ExperimentSpec, cache: Optional[ReferenceCache] = None,
                          reaction: Optional[ReactionTerm] = None,
                          reference: Optional[np.ndarray] = None) -> ConvergenceReport:
    """Errors of every scheme at every step size against one reference endpoint.

    ``reference`` short-circuits the reference solve (used for exactness checks).
    A blow-up in one run is recorded and the sweep continues.
    """
    t_start = time.perf_counter()
    problem = build_problem(spec, reaction)
    if reference is None:
        u_ref, ref_info = get_reference(spec, problem, cache)
    else:
        u_ref, ref_info = np.asarray(reference, dtype=float), {"cache_hit": False, "supplied": True}

    results = {}
    for scheme in spec.schemes:
        key = SchemeKind.parse(scheme).value
        res = SchemeResult(key, list(spec.taus), [])
        t0 = time.perf_counter()
        for tau in spec.taus:
            n_steps = max(1, int(round(spec.t_end / tau)))
            try:
                u = integrate(scheme, problem.op, problem.plan, problem.f, problem.u0, spec.t_end, n_steps)
            except BlowUpError as exc:
                log.warning("%s %s tau=%g: %s", spec.name, key, tau, exc)
                res.errors.append(None)
                res.failures[tau] = str(exc)
                continue
            res.errors.append(float(np.max(np.abs(u - u_ref))))
        res.wall_time = time.perf_counter() - t0
        try:
            res.pairwise_orders, res.tail_slope = estimate_order(res.pairs())
        except ValueError:
            res.pairwise_orders = [None] * len(res.taus)
            res.tail_slope = None
        results[key] = res

    op = problem.op
    meta = {
        "preset": spec.preset,
        "dimension": spec.dimension,
        "n_interior": list(spec.n_interior),
        "n_unknowns": op.dim,
        "faces": {s: {"alpha": bc.alpha, "beta": bc.beta, "mode": spec.faces[s].mode}
                  for s, bc in problem.faces.items()},
        "reaction": problem.f.to_dict(),
        "t_end": spec.t_end,
        "reference": {"abs_tol": spec.reference.abs_tol, "rel_tol": spec.reference.rel_tol,
                      **{k: v for k, v in ref_info.items()}},
        "backend": "spectral" if problem.plan is not None else "dense",
        "error_floor": ERROR_FLOOR,
        "tail_window": TAIL_WINDOW,
        "version": __version__,
        "wall_time": time.perf_counter() - t_start,
    }
    return ConvergenceReport(spec.name, results, meta)
