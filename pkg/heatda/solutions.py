# heatda/solutions.py
"""Библиотека точных решений уравнения ∂_t u − Δu = f."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

Fn = Callable[..., np.ndarray]

PI = np.pi


@dataclass(frozen=True)
class ManufacturedSolution:
    id: str
    description: str
    u: Fn  # u(t, x, y)
    grad: Fn  # -> (u_x, u_y)
    dt: Fn
    grad_dt: Fn  # -> (∂_t u_x, ∂_t u_y)
    hess: Fn  # -> (u_xx, u_xy, u_yy)
    f: Fn
    boundary_compatible: bool

    def laplacian(self, t, x, y) -> np.ndarray:
        uxx, _, uyy = self.hess(t, x, y)
        return np.asarray(uxx) + np.asarray(uyy)

    def heat_residual(self, t, x, y) -> np.ndarray:
        return np.asarray(self.dt(t, x, y)) - self.laplacian(t, x, y) - np.asarray(self.f(t, x, y))

    # срезы по времени для пространственных операций
    def at(self, t: float) -> Fn:
        return lambda x, y: self.u(t, x, y)

    def grad_at(self, t: float) -> Fn:
        return lambda x, y: self.grad(t, x, y)


def _z(x) -> np.ndarray:
    return np.zeros_like(np.asarray(x, dtype=float))


def _ss(x, y) -> np.ndarray:
    return np.sin(PI * x) * np.sin(PI * y)


def _ss_grad(x, y):
    return PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)


def _ss_hess(x, y):
    s = _ss(x, y)
    return -PI**2 * s, PI**2 * np.cos(PI * x) * np.cos(PI * y), -PI**2 * s


def _scaled(g: Callable, c: Callable):
    """(t, x, y) -> c(t)·g(x, y) покомпонентно."""
    def fn(t, x, y):
        vals = g(x, y)
        if isinstance(vals, tuple):
            return tuple(c(t) * v for v in vals)
        return c(t) * vals
    return fn


_decay = lambda t: np.exp(-2.0 * PI**2 * t)  # noqa: E731

S1 = ManufacturedSolution(
    id="S1",
    description="exp(-2π²t) sin(πx) sin(πy), f = 0",
    u=_scaled(_ss, _decay),
    grad=_scaled(_ss_grad, _decay),
    dt=_scaled(_ss, lambda t: -2.0 * PI**2 * _decay(t)),
    grad_dt=_scaled(_ss_grad, lambda t: -2.0 * PI**2 * _decay(t)),
    hess=_scaled(_ss_hess, _decay),
    f=lambda t, x, y: _z(x) + _z(y),
    boundary_compatible=True,
)

S2 = ManufacturedSolution(
    id="S2",
    description="(1+t) sin(πx) sin(πy), f = sin(πx) sin(πy)(1 + 2π²(1+t))",
    u=_scaled(_ss, lambda t: 1.0 + t),
    grad=_scaled(_ss_grad, lambda t: 1.0 + t),
    dt=_scaled(_ss, lambda t: 1.0),
    grad_dt=_scaled(_ss_grad, lambda t: 1.0),
    hess=_scaled(_ss_hess, lambda t: 1.0 + t),
    f=_scaled(_ss, lambda t: 1.0 + 2.0 * PI**2 * (1.0 + t)),
    boundary_compatible=True,
)


def _exp(t, x, y):
    return np.exp(x + t) + _z(y)


U1 = ManufacturedSolution(
    id="U1",
    description="exp(x+t), f = 0",
    u=_exp,
    grad=lambda t, x, y: (_exp(t, x, y), _z(x) + _z(y)),
    dt=_exp,
    grad_dt=lambda t, x, y: (_exp(t, x, y), _z(x) + _z(y)),
    hess=lambda t, x, y: (_exp(t, x, y), _z(x) + _z(y), _z(x) + _z(y)),
    f=lambda t, x, y: _z(x) + _z(y),
    boundary_compatible=False,
)

U2 = ManufacturedSolution(
    id="U2",
    description="x² + y² + 4t, f = 0",
    u=lambda t, x, y: x**2 + y**2 + 4.0 * t,
    grad=lambda t, x, y: (2.0 * x + _z(y), 2.0 * y + _z(x)),
    dt=lambda t, x, y: 4.0 + _z(x) + _z(y),
    grad_dt=lambda t, x, y: (_z(x) + _z(y), _z(x) + _z(y)),
    hess=lambda t, x, y: (2.0 + _z(x) + _z(y), _z(x) + _z(y), 2.0 + _z(x) + _z(y)),
    f=lambda t, x, y: _z(x) + _z(y),
    boundary_compatible=False,
)

# нулевые данные: проверка единственности дискретного решения
Z0 = ManufacturedSolution(
    id="Z0",
    description="u ≡ 0, f = 0",
    u=lambda t, x, y: _z(x) + _z(y),
    grad=lambda t, x, y: (_z(x) + _z(y), _z(x) + _z(y)),
    dt=lambda t, x, y: _z(x) + _z(y),
    grad_dt=lambda t, x, y: (_z(x) + _z(y), _z(x) + _z(y)),
    hess=lambda t, x, y: (_z(x) + _z(y),) * 3,
    f=lambda t, x, y: _z(x) + _z(y),
    boundary_compatible=True,
)


def builtin_solutions() -> List[ManufacturedSolution]:
    return [S1, S2, U1, U2, Z0]


_BY_ID: Dict[str, ManufacturedSolution] = {s.id: s for s in builtin_solutions()}


def get_solution(solution_id: str) -> ManufacturedSolution:
    try:
        return _BY_ID[solution_id]
    except KeyError:
        raise ValueError(f"неизвестное решение {solution_id!r}; доступны: {', '.join(_BY_ID)}") from None
