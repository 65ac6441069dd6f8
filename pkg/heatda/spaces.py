# heatda/spaces.py
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .elements import assemble_stiffness, grad_load_vector
from .mesh import TriMesh


class BoundaryViolationError(ValueError):
    """Функция для пространства с условием Дирихле не обращается в ноль на ∂Ω."""


class DegenerateMeshError(ValueError):
    """Нет внутренних вершин: пространство W_h пусто."""


class SpaceKind(str, Enum):
    FULL = "Full"
    DIRICHLET = "Dirichlet"


class TimeBasis(str, Enum):
    P1 = "P1Continuous"
    P0 = "P0Slabwise"


BOUNDARY_TOL = 1e-12


# ========== Степени свободы ==========

@dataclass(frozen=True, eq=False)
class DofMap:
    kind: SpaceKind
    vertex_to_dof: np.ndarray  # -1 для закреплённых (граничных) вершин
    n_dofs: int

    @property
    def n_vertices(self) -> int:
        return int(self.vertex_to_dof.size)

    @cached_property
    def dof_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.vertex_to_dof >= 0)

    @cached_property
    def extension(self) -> sparse.csr_matrix:
        """E: (nv × n_dofs), продолжение нулём на закреплённые вершины."""
        return sparse.csr_matrix(
            (np.ones(self.n_dofs), (self.dof_vertices, np.arange(self.n_dofs))),
            shape=(self.n_vertices, self.n_dofs),
        )

    def restrict(self, matrix: sparse.spmatrix) -> sparse.csr_matrix:
        """Eᵀ M E — сужение матрицы на вершинах к степеням свободы."""
        E = self.extension
        return (E.T @ matrix @ E).tocsr()

    def same_as(self, other: "DofMap") -> bool:
        return self.kind == other.kind and np.array_equal(self.vertex_to_dof, other.vertex_to_dof)


def build_dofmap(mesh: TriMesh, kind: SpaceKind) -> DofMap:
    v2d = np.full(mesh.n_vertices, -1, dtype=np.int64)
    free = np.ones(mesh.n_vertices, dtype=bool) if kind == SpaceKind.FULL else ~mesh.boundary_vertex_flags
    v2d[free] = np.arange(int(free.sum()))
    v2d.setflags(write=False)
    return DofMap(kind=kind, vertex_to_dof=v2d, n_dofs=int(free.sum()))


# ========== Время ==========

@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_slabs: int

    def __post_init__(self) -> None:
        if self.T <= 0 or self.n_slabs < 1:
            raise ValueError(f"некорректная сетка по времени: T={self.T}, N_t={self.n_slabs}")

    @classmethod
    def for_mesh(cls, T: float, n: int, c_t: float = 1.0) -> "TimeGrid":
        """τ = C_t / n; T обязано делиться на τ."""
        slabs = T * n / c_t
        if abs(slabs - round(slabs)) > 1e-9 * max(1.0, slabs) or round(slabs) < 1:
            raise ValueError(f"T={T} не кратно τ={c_t / n:g} (n={n}, C_t={c_t})")
        return cls(T=float(T), n_slabs=int(round(slabs)))

    @property
    def tau(self) -> float:
        return self.T / self.n_slabs

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_slabs + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def index_of(self, t: float) -> int:
        """Номер узла, совпадающего с t; ValueError, если t не на сетке."""
        k = t / self.tau
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)) or not (0 <= round(k) <= self.n_slabs):
            raise ValueError(f"момент t={t} не совпадает с узлом сетки по времени (τ={self.tau:g})")
        return int(round(k))


# ========== Поля ==========

@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    basis: TimeBasis
    dofmap: DofMap
    grid: TimeGrid
    coeffs: np.ndarray  # строки: время, столбцы: пространственные dof

    def __post_init__(self) -> None:
        rows = self.grid.n_slabs + 1 if self.basis == TimeBasis.P1 else self.grid.n_slabs
        if self.coeffs.shape != (rows, self.dofmap.n_dofs):
            raise ValueError(
                f"форма коэффициентов {self.coeffs.shape} не согласована с базисом "
                f"{self.basis.value} и {self.dofmap.n_dofs} dof (ожидалось {(rows, self.dofmap.n_dofs)})"
            )

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def vertex_values(self) -> np.ndarray:
        """(rows, nv): значения во всех вершинах, нули на закреплённых."""
        out = np.zeros((self.coeffs.shape[0], self.dofmap.n_vertices))
        out[:, self.dofmap.dof_vertices] = self.coeffs
        return out

    def like(self, coeffs: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.basis, self.dofmap, self.grid, np.asarray(coeffs, dtype=float).reshape(self.coeffs.shape))

    def _check_compatible(self, other: "SpaceTimeField") -> None:
        if self.basis != other.basis or self.grid != other.grid or not self.dofmap.same_as(other.dofmap):
            raise ValueError("поля определены на разных пространствах")

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return self.like(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return self.like(self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpaceTimeField":
        return self.like(c * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpaceTimeField":
        return self.like(-self.coeffs)


def zeros(basis: TimeBasis, dofmap: DofMap, grid: TimeGrid) -> SpaceTimeField:
    rows = grid.n_slabs + 1 if basis == TimeBasis.P1 else grid.n_slabs
    return SpaceTimeField(basis, dofmap, grid, np.zeros((rows, dofmap.n_dofs)))


def field_from_flat(basis: TimeBasis, dofmap: DofMap, grid: TimeGrid, flat: np.ndarray) -> SpaceTimeField:
    rows = grid.n_slabs + 1 if basis == TimeBasis.P1 else grid.n_slabs
    return SpaceTimeField(basis, dofmap, grid, np.asarray(flat, dtype=float).reshape(rows, dofmap.n_dofs))


# ========== Интерполяция ==========

SpaceTimeFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def nodal_interpolate(f: SpaceTimeFn, mesh: TriMesh, grid: TimeGrid, target: SpaceKind,
                      basis: TimeBasis = TimeBasis.P1) -> SpaceTimeField:
    """
    Узловая интерполяция: значения f в (узел времени или середина слоя, вершина).
    Для W_h проверяем, что f обращается в ноль на границе.
    """
    dofmap = build_dofmap(mesh, target)
    times = grid.nodes if basis == TimeBasis.P1 else grid.midpoints
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    values = np.array([np.asarray(f(t, x, y), dtype=float) * np.ones(mesh.n_vertices) for t in times])

    if target == SpaceKind.DIRICHLET:
        on_boundary = values[:, mesh.boundary_vertex_flags]
        worst = float(np.abs(on_boundary).max()) if on_boundary.size else 0.0
        if worst > BOUNDARY_TOL:
            raise BoundaryViolationError(f"функция не равна нулю на ∂Ω: max |f| = {worst:.3e}")
    return SpaceTimeField(basis, dofmap, grid, values[:, dofmap.dof_vertices])


def interpolate_vertices(f: Callable[[np.ndarray, np.ndarray], np.ndarray], mesh: TriMesh) -> np.ndarray:
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.asarray(f(x, y), dtype=float) * np.ones(mesh.n_vertices)


class _DirichletStiffness:
    """Факторизация жёсткости на W_h; кэшируется на сетке."""

    def __init__(self, mesh: TriMesh):
        self.dofmap = build_dofmap(mesh, SpaceKind.DIRICHLET)
        if self.dofmap.n_dofs == 0:
            raise DegenerateMeshError("у сетки нет внутренних вершин")
        self.K = self.dofmap.restrict(assemble_stiffness(mesh))
        self.lu = splu(self.K.tocsc())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)


_STIFFNESS_CACHE: dict[int, tuple[TriMesh, _DirichletStiffness]] = {}


def dirichlet_stiffness(mesh: TriMesh) -> _DirichletStiffness:
    hit = _STIFFNESS_CACHE.get(id(mesh))
    if hit is not None and hit[0] is mesh:
        return hit[1]
    fac = _DirichletStiffness(mesh)
    if len(_STIFFNESS_CACHE) > 8:
        _STIFFNESS_CACHE.clear()
    _STIFFNESS_CACHE[id(mesh)] = (mesh, fac)
    return fac


def ritz_project(f: Callable, grad_f: Callable, mesh: TriMesh) -> np.ndarray:
    """
    Проекция Ритца на W_h: (∇π_h f, ∇v) = (∇f, ∇v) для всех v ∈ W_h.
    Правая часть считается 7-точечной квадратурой по градиенту f.
    """
    boundary = mesh.vertices[mesh.boundary_vertex_flags]
    if boundary.size:
        worst = float(np.abs(np.asarray(f(boundary[:, 0], boundary[:, 1]), dtype=float)).max())
        if worst > BOUNDARY_TOL:
            raise BoundaryViolationError(f"проекция Ритца требует f|∂Ω = 0, max |f| = {worst:.3e}")
    fac = dirichlet_stiffness(mesh)
    rhs = grad_load_vector(mesh, grad_f)[fac.dofmap.dof_vertices]
    return fac.solve(rhs)


def ritz_interpolate(u: SpaceTimeFn, grad_u: Callable, mesh: TriMesh, grid: TimeGrid) -> SpaceTimeField:
    """π_h u(t_k, ·) в каждом узле времени (устойчивый вариант)."""
    dofmap = build_dofmap(mesh, SpaceKind.DIRICHLET)
    rows = [
        ritz_project(lambda x, y, t=t: u(t, x, y), lambda x, y, t=t: grad_u(t, x, y), mesh)
        for t in grid.nodes
    ]
    return SpaceTimeField(TimeBasis.P1, dofmap, grid, np.array(rows).reshape(grid.n_slabs + 1, dofmap.n_dofs))


def time_derivative(u: SpaceTimeField) -> SpaceTimeField:
    """∂_t u на каждом слое: (u_{k+1} − u_k)/τ, точно для кусочно-линейного по времени u."""
    if u.basis != TimeBasis.P1:
        raise ValueError("производная по времени определена только для P1Continuous")
    return SpaceTimeField(TimeBasis.P0, u.dofmap, u.grid, np.diff(u.coeffs, axis=0) / u.grid.tau)
