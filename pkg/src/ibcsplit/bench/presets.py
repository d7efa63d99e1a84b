"""Built-in experiments: closed-form initial data and their face traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..discretize import AnalyticField, FaceBC

PI = np.pi


@dataclass(frozen=True)
class Preset:
    id: str
    dimension: int
    description: str
    u0: AnalyticField
    faces: Mapping[str, tuple[float, float]]   # side -> (alpha, beta)
    t_end: float
    n_interior: tuple[int, ...]
    # boundary data as literally printed with the experiment, where it differs
    # from (or merely restates) the trace of u0
    literal_data: Mapping[str, float] = field(default_factory=dict)

    def face_bcs(self) -> dict[str, FaceBC]:
        return {side: FaceBC(float(a), float(b)) for side, (a, b) in self.faces.items()}

    @property
    def default_taus(self) -> tuple[float, ...]:
        base = 0.1 if self.dimension == 1 else 0.05
        return tuple(base * 2.0 ** -k for k in range(7))


def _ex5_1():
    return AnalyticField(lambda x: 2 + np.sin(PI * x / 2),
                         lambda x: PI / 2 * np.cos(PI * x / 2))


def _ex5_2():
    return AnalyticField(lambda x: 1 + 2 / PI * np.cos(PI * x / 2),
                         lambda x: -np.sin(PI * x / 2))


def _ex5_3():
    return AnalyticField(lambda x: 0.5 + 1 / (2 * PI) - np.cos(PI * x) / (2 * PI),
                         lambda x: 0.5 * np.sin(PI * x))


def _ex5_4():
    return AnalyticField(lambda x: 2 - 2 * np.cos(PI * x / 2),
                         lambda x: PI * np.sin(PI * x / 2))


def _ex6_1():
    return AnalyticField(lambda x, y: 1 + np.sin(PI * x) * np.sin(PI * y),
                         lambda x, y: PI * np.cos(PI * x) * np.sin(PI * y),
                         lambda x, y: PI * np.sin(PI * x) * np.cos(PI * y))


def _ex6_2():
    def bump(y):
        return np.exp(-10 * (y - 0.5) ** 2)

    return AnalyticField(
        lambda x, y: 3 + bump(y) * np.cos(2 * PI * (x + y)),
        lambda x, y: -2 * PI * bump(y) * np.sin(2 * PI * (x + y)),
        lambda x, y: bump(y) * (-20 * (y - 0.5) * np.cos(2 * PI * (x + y))
                                - 2 * PI * np.sin(2 * PI * (x + y))),
    )


DIRICHLET = (1.0, 0.0)
NEUMANN = (0.0, 1.0)
ROBIN = (1.0, 1.0)

PRESETS: dict[str, Preset] = {
    p.id: p for p in [
        Preset("ex5_1", 1, "1D Dirichlet, u0 = 2 + sin(pi x / 2)", _ex5_1(),
               {"left": DIRICHLET, "right": DIRICHLET}, 0.5, (499,),
               {"left": 2.0, "right": 3.0}),
        Preset("ex5_2", 1, "1D Neumann, u0 = 1 + (2/pi) cos(pi x / 2)", _ex5_2(),
               {"left": NEUMANN, "right": NEUMANN}, 0.5, (499,),
               {"left": 1.0, "right": 2.0}),
        Preset("ex5_3", 1, "1D Robin (alpha = beta = 1), u0 = 1/2 + 1/(2 pi) - cos(pi x)/(2 pi)", _ex5_3(),
               {"left": ROBIN, "right": ROBIN}, 0.5, (499,),
               {"left": 0.0, "right": 1 + 1 / (2 * PI)}),
        Preset("ex5_4", 1, "1D Neumann left / Dirichlet right, u0 = 2 - 2 cos(pi x / 2)", _ex5_4(),
               {"left": NEUMANN, "right": DIRICHLET}, 0.5, (499,),
               {"left": 0.0, "right": 2.0}),
        Preset("ex6_1", 2, "2D Dirichlet (u = 1 on the boundary), u0 = 1 + sin(pi x) sin(pi y)", _ex6_1(),
               {"left": DIRICHLET, "right": DIRICHLET, "bottom": DIRICHLET, "top": DIRICHLET},
               0.1, (50, 50), {"left": 1.0, "right": 1.0, "bottom": 1.0, "top": 1.0}),
        Preset("ex6_2", 2, "2D Dirichlet top/bottom, Neumann left/right, "
               "u0 = 3 + exp(-10 (y - 1/2)^2) cos(2 pi (x + y))", _ex6_2(),
               {"left": NEUMANN, "right": NEUMANN, "bottom": DIRICHLET, "top": DIRICHLET},
               0.1, (50, 50)),
    ]
}


def get_preset(preset_id: str) -> Preset:
    try:
        return PRESETS[preset_id]
    except KeyError:
        raise KeyError(f"unknown preset {preset_id!r}; available: {', '.join(PRESETS)}") from None


def literal_faces(preset: Preset) -> Optional[dict[str, float]]:
    return dict(preset.literal_data) or None
