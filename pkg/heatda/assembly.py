# heatda/assembly.py
"""
Сборка седловой системы нормальных уравнений

    [[M_ω + S, Gᵀ], [G, −S*]] [u; z] = [(q̃, ·)_ω; ⟨f̃, ·⟩]

Условия Дирихле учтены исключением dof: закреплённые вершины в систему не входят.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .elements import SIMPSON_NODES, SIMPSON_WEIGHTS, assemble_mass, load_vector
from .forms import (
    StabilizerPair, Variant, constraint_matrix, omega_mass_matrix, time_difference,
)
from .mesh import Region, TriMesh, triangles_in_region
from .solutions import ManufacturedSolution, get_solution
from .spaces import (
    SpaceTimeField, TimeBasis, TimeGrid, field_from_flat, interpolate_vertices,
)
from .utils import atomic_write_text, rng_for


class AssemblyError(RuntimeError):
    """Нарушен инвариант собранной системы (например, матрица вырождена)."""


class PerturbationTarget(str, Enum):
    OBSERVATION = "ObservationOnly"
    SOURCE = "SourceOnly"
    BOTH = "Both"


@dataclass(frozen=True)
class DataSpec:
    solution_id: str
    delta: float = 0.0
    seed: int = 0
    target: PerturbationTarget = PerturbationTarget.BOTH
    # множитель данных (q, f); решение линейно по нему
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError(f"амплитуда возмущения должна быть >= 0, получено {self.delta}")


@dataclass(frozen=True, eq=False)
class Perturbation:
    dq: np.ndarray  # (N_t+1, nv), ненулевое только в вершинах ω
    df: np.ndarray  # (N_t, n_dual), узловые значения шума в источнике
    amplitude: float
    q_noise_norm: float  # ‖δq‖_{L²((0,T)×ω)}
    f_noise_norm: float  # ‖δf‖_{L²((0,T)×Ω)}


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    n_u: int
    n_z: int
    variant: Variant
    pair: StabilizerPair
    omega: Region
    # блоки: P = M_ω + S, G, S*; нужны предобуславливателю и диагностике
    P: sparse.csr_matrix = field(repr=False)
    G: sparse.csr_matrix = field(repr=False)
    M_omega: sparse.csr_matrix = field(repr=False)
    perturbation: Optional[Perturbation] = None

    @property
    def dimension(self) -> int:
        return self.n_u + self.n_z

    def split(self, x: np.ndarray) -> tuple[SpaceTimeField, SpaceTimeField]:
        grid = self.pair.grid
        u = field_from_flat(TimeBasis.P1, self.pair.primal, grid, x[: self.n_u])
        z = field_from_flat(TimeBasis.P0, self.pair.dual, grid, x[self.n_u:])
        return u, z


# ========== Оператор ==========

def _couple_blocks(P: sparse.spmatrix, G: sparse.spmatrix, S_star: sparse.spmatrix) -> sparse.csr_matrix:
    return sparse.bmat([[P, G.T], [G, -S_star]], format="csr")


def saddle_matrix(pair: StabilizerPair, omega: Region):
    """(A, P, G, M_ω) для данной пары стабилизаторов."""
    mesh, grid = pair.mesh, pair.grid
    if mesh.n and not omega.is_resolved(mesh.n):
        raise ValueError(f"ω = {omega.label()} не является объединением элементов сетки n={mesh.n}")
    M_omega = omega_mass_matrix(mesh, grid, omega, pair.primal)
    G = constraint_matrix(mesh, grid, pair.primal, pair.dual)
    P = (M_omega + pair.S).tocsr()
    return _couple_blocks(P, G, pair.S_star), P, G, M_omega


# ========== Данные ==========

def apply_perturbation(data: DataSpec, mesh: TriMesh, grid: TimeGrid, omega: Region,
                       pair: StabilizerPair) -> Optional[Perturbation]:
    """
    δq = δ·U(−1,1) в каждой паре (узел времени, вершина ω), δf = δ·U(−1,1) в каждой паре
    (слой, dof множителя). Потоки случайных чисел разведены по цели шума.
    При δ = 0 возмущения нет совсем.
    """
    if data.delta == 0:
        return None
    nv, n_t = mesh.n_vertices, grid.n_slabs
    tris = triangles_in_region(mesh, omega)
    omega_vertices = np.unique(mesh.triangles[tris].ravel())

    dq = np.zeros((n_t + 1, nv))
    df = np.zeros((n_t, pair.dual.n_dofs))
    if data.target in (PerturbationTarget.OBSERVATION, PerturbationTarget.BOTH):
        rng = rng_for(data.seed, 1, mesh.n)
        dq[:, omega_vertices] = data.delta * rng.uniform(-1.0, 1.0, size=(n_t + 1, omega_vertices.size))
    if data.target in (PerturbationTarget.SOURCE, PerturbationTarget.BOTH):
        rng = rng_for(data.seed, 2, mesh.n)
        df[:] = data.delta * rng.uniform(-1.0, 1.0, size=df.shape)

    # нормы реализованного шума (L²-суррогат размера возмущения)
    M_om = assemble_mass(mesh, tris)
    tau = grid.tau
    MdQ = (M_om @ dq.T).T
    q_sq = tau / 3.0 * (np.sum(dq[:-1] * MdQ[:-1]) + np.sum(dq[:-1] * MdQ[1:]) + np.sum(dq[1:] * MdQ[1:]))
    M_z = pair.dual.restrict(assemble_mass(mesh))
    f_sq = tau * float(np.sum(df * (M_z @ df.T).T))
    return Perturbation(
        dq=dq, df=df, amplitude=data.delta,
        q_noise_norm=float(np.sqrt(max(q_sq, 0.0))),
        f_noise_norm=float(np.sqrt(max(f_sq, 0.0))),
    )


def observation_values(solution: ManufacturedSolution, mesh: TriMesh, grid: TimeGrid) -> np.ndarray:
    """q = u|_ω в узлах: (N_t+1, nv); вне ω значения не используются (M_ω там нулевая)."""
    return np.array([interpolate_vertices(solution.at(t), mesh) for t in grid.nodes])


def source_load(solution: ManufacturedSolution, mesh: TriMesh, grid: TimeGrid, pair: StabilizerPair) -> np.ndarray:
    """⟨f, w⟩ по слоям: Симпсон по времени × 7-точечная квадратура по пространству."""
    tau, nodes = grid.tau, grid.nodes
    out = np.zeros((grid.n_slabs, pair.dual.n_dofs))
    for k in range(grid.n_slabs):
        b = np.zeros(mesh.n_vertices)
        for s, ws in zip(SIMPSON_NODES, SIMPSON_WEIGHTS):
            t = nodes[k] + s * tau
            b += tau * ws * load_vector(mesh, lambda x, y, t=t: solution.f(t, x, y))
        out[k] = b[pair.dual.dof_vertices]
    return out


def assemble_system(mesh: TriMesh, grid: TimeGrid, pair: StabilizerPair, omega: Region,
                    data: DataSpec) -> SaddleSystem:
    solution = get_solution(data.solution_id)
    A, P, G, M_omega = saddle_matrix(pair, omega)

    q = observation_values(solution, mesh, grid)
    f_load = source_load(solution, mesh, grid, pair)
    pert = apply_perturbation(data, mesh, grid, omega, pair)
    if pert is not None:
        q = q + pert.dq
        M_z = pair.dual.restrict(assemble_mass(mesh))
        f_load = f_load + grid.tau * (M_z @ pert.df.T).T

    E = pair.primal.extension
    q_dofs = (E.T @ q.T).T  # значения в dof прямой переменной
    rhs_u = M_omega @ q_dofs.ravel()
    rhs = data.scale * np.concatenate([rhs_u, f_load.ravel()])

    system = SaddleSystem(
        matrix=A, rhs=rhs, n_u=pair.primal.n_dofs * (grid.n_slabs + 1),
        n_z=pair.dual.n_dofs * grid.n_slabs, variant=pair.variant, pair=pair, omega=omega,
        P=P, G=G, M_omega=M_omega, perturbation=pert,
    )
    logging.info(
        "[ASSEMBLY] %s n=%d N_t=%d: dim=%d (N_u=%d, N_z=%d), nnz=%d, delta=%g",
        pair.variant.value, mesh.n, grid.n_slabs, system.dimension, system.n_u, system.n_z,
        A.nnz, data.delta,
    )
    return system


def check_nonsingular(system: SaddleSystem) -> None:
    """Факторизация для проверки: вырожденность — нарушение инварианта, не регуляризуем."""
    try:
        splu(system.matrix.tocsc(), permc_spec="COLAMD")
    except RuntimeError as e:
        raise AssemblyError(f"матрица системы вырождена ({system.variant.value}): {e}") from e


# ========== Диагностика ==========

def lagrangian(system: SaddleSystem, u: SpaceTimeField, z: SpaceTimeField) -> float:
    """
    L(u,z) = ½‖u − q‖²_ω + ½s(u,u) − ½s*(z,z) + G(u,z) − ⟨f,z⟩ с точностью до константы,
    не зависящей от (u, z): ½‖q‖²_ω выброшено, данные берутся из правой части системы.
    """
    uu, zz = u.flat, z.flat
    b_u, b_z = system.rhs[: system.n_u], system.rhs[system.n_u:]
    quad = 0.5 * uu @ (system.P @ uu) - 0.5 * zz @ (system.pair.S_star @ zz)
    return float(quad + zz @ (system.G @ uu) - uu @ b_u - zz @ b_z)


def coercivity_gap(system: SaddleSystem, u: SpaceTimeField, z: SpaceTimeField) -> tuple[float, float]:
    """
    (A[(u,z),(u,−z)], ‖u‖²_ω + s(u,u) + s*(z,z)) — для проверки тождества.
    Левая часть берётся из собранной матрицы целиком.
    """
    x = np.concatenate([u.flat, z.flat])
    y = np.concatenate([u.flat, -z.flat])
    lhs = float(y @ (system.matrix @ x))
    pair = system.pair
    rhs = float(u.flat @ (system.M_omega @ u.flat)) + pair.s(u) + pair.s_star(z)
    return lhs, rhs


def alpha_certificate(system: SaddleSystem, rng: np.random.Generator, n_pairs: int = 20,
                      max_power: int = 12) -> tuple[float, float]:
    """
    Устойчивый вариант: ищем α ∈ {2^-k}, при котором для n_pairs случайных (u,z)
    A[(u,z),(u, αh²∂_t u − z)] ≥ c·(s(u,u) + α‖h∂_t u‖² + ‖u‖²_ω + s*(z,z)).
    Возвращает (α, c) с наибольшим c.
    """
    pair = system.pair
    if pair.variant != Variant.STABLE:
        raise ValueError("построение α относится только к устойчивому варианту")
    grid, h = pair.grid, pair.mesh.h
    D = sparse.kron(time_difference(grid) / grid.tau, sparse.identity(pair.primal.n_dofs), format="csr")
    samples = []
    for _ in range(n_pairs):
        u = rng.standard_normal(system.n_u)
        z = rng.standard_normal(system.n_z)
        x = np.concatenate([u, z])
        samples.append((x, u, z, D @ u))

    best = (0.0, -np.inf)
    for k in range(max_power + 1):
        alpha = 2.0 ** (-k)
        worst = np.inf
        for x, u, z, dtu in samples:
            y = np.concatenate([u, alpha * h**2 * dtu - z])
            lhs = float(y @ (system.matrix @ x))
            norm = (pair.S @ u) @ u + alpha * (pair.dt_mass @ u) @ u + (system.M_omega @ u) @ u + (pair.S_star @ z) @ z
            worst = min(worst, lhs / float(norm))
        if worst > best[1]:
            best = (alpha, worst)
    return best


def export_coordinate(matrix: sparse.spmatrix, path: str | Path) -> None:
    """Координатный текстовый формат: 'строка столбец значение', индексы с 1."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{r + 1} {c + 1} {v:.17g}" for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order])]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
