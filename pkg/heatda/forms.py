# heatda/forms.py
"""
Билинейные формы: масса на ω, жёсткость a, форма связи G, скачковый стабилизатор 𝒥,
стабилизаторы s, s* обоих вариантов, нормы |·|_𝒱, ‖·‖_𝒲, тройная норма и нормы ошибок.

Пространственно-временные матрицы собираются как кронекеровы произведения
«матрица по времени ⊗ матрица по пространству»; вектор поля — coeffs.ravel()
(время — медленный индекс).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Union

import numpy as np
from scipy import sparse

from .elements import (
    SIMPSON_NODES, SIMPSON_WEIGHTS, TRI7,
    assemble_mass, assemble_stiffness, load_vector, quadrature_points,
)
from .mesh import Region, TriMesh, triangles_in_region
from .spaces import (
    DofMap, SpaceKind, SpaceTimeField, TimeBasis, TimeGrid,
    build_dofmap, dirichlet_stiffness, time_derivative,
)


class Variant(str, Enum):
    UNSTABLE = "UnstableModel"
    STABLE = "StableModel"
    # s* = ∫𝒥 dt вместо a (альтернативный двойственный стабилизатор)
    UNSTABLE_JUMP_DUAL = "UnstableJumpDual"

    @property
    def is_unstable(self) -> bool:
        return self != Variant.STABLE


def variant_spaces(variant: Variant) -> tuple[SpaceKind, SpaceKind]:
    """(пространство прямой переменной, пространство множителя)."""
    if variant == Variant.STABLE:
        return SpaceKind.DIRICHLET, SpaceKind.DIRICHLET
    return SpaceKind.FULL, SpaceKind.DIRICHLET


# ========== Пространственные формы ==========

def jump_stabilizer_matrix(mesh: TriMesh) -> sparse.csr_matrix:
    """
    𝒥(u,u) = Σ_F h |F| [n·∇u]_F²: градиент P1 постоянен на треугольнике,
    поэтому вклад ребра — h·|F|·(cᵀu)², c собирается из градиентов базиса слева и справа.
    """
    fa = mesh.face_arrays
    if fa["lengths"].size == 0:
        return sparse.csr_matrix((mesh.n_vertices, mesh.n_vertices))
    n = fa["normals"]
    c_left = np.einsum("mkd,md->mk", mesh.basis_gradients[fa["left"]], n)
    c_right = -np.einsum("mkd,md->mk", mesh.basis_gradients[fa["right"]], n)
    coef = np.concatenate([c_left, c_right], axis=1)  # (m, 6)
    idx = np.concatenate([mesh.triangles[fa["left"]], mesh.triangles[fa["right"]]], axis=1)
    local = (mesh.h * fa["lengths"])[:, None, None] * coef[:, :, None] * coef[:, None, :]
    rows = np.broadcast_to(idx[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(idx[:, None, :], local.shape).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2).tocsr()


def face_jump_pairing(mesh: TriMesh, u: np.ndarray, v: np.ndarray) -> float:
    """Σ_F ∫_F [n·∇u] v ds; след P1 на ребре линеен, поэтому ∫_F v = |F|·(v_a + v_b)/2."""
    fa = mesh.face_arrays
    if fa["lengths"].size == 0:
        return 0.0
    n = fa["normals"]
    g_left = np.einsum("mk,mkd->md", u[mesh.triangles[fa["left"]]], mesh.basis_gradients[fa["left"]])
    g_right = np.einsum("mk,mkd->md", u[mesh.triangles[fa["right"]]], mesh.basis_gradients[fa["right"]])
    jump = np.einsum("md,md->m", g_left - g_right, n)
    trace = 0.5 * fa["lengths"] * (v[fa["vertices"][:, 0]] + v[fa["vertices"][:, 1]])
    return float(np.dot(jump, trace))


# ========== Матрицы по времени ==========

def time_mass(grid: TimeGrid) -> sparse.csr_matrix:
    """∫ φ_k φ_l dt для непрерывных кусочно-линейных по времени функций."""
    tau = grid.tau
    main = np.full(grid.n_slabs + 1, 2.0 * tau / 3.0)
    main[[0, -1]] = tau / 3.0
    off = np.full(grid.n_slabs, tau / 6.0)
    return sparse.diags([off, main, off], [-1, 0, 1], format="csr")


def time_difference(grid: TimeGrid) -> sparse.csr_matrix:
    """D: (N_t × N_t+1), (Du)_k = u_{k+1} − u_k."""
    m = grid.n_slabs
    return sparse.diags([-np.ones(m), np.ones(m)], [0, 1], shape=(m, m + 1), format="csr")


def time_average(grid: TimeGrid) -> sparse.csr_matrix:
    m = grid.n_slabs
    return sparse.diags([np.full(m, 0.5), np.full(m, 0.5)], [0, 1], shape=(m, m + 1), format="csr")


def time_stiffness(grid: TimeGrid) -> sparse.csr_matrix:
    D = time_difference(grid)
    return (D.T @ D / grid.tau).tocsr()


# ========== Пространственно-временные блоки ==========

def omega_mass_matrix(mesh: TriMesh, grid: TimeGrid, omega: Region, dofmap: DofMap) -> sparse.csr_matrix:
    M_om = dofmap.restrict(assemble_mass(mesh, triangles_in_region(mesh, omega)))
    return sparse.kron(time_mass(grid), M_om, format="csr")


def jump_time_integral_matrix(mesh: TriMesh, grid: TimeGrid, dofmap: DofMap) -> sparse.csr_matrix:
    """∫₀ᵀ 𝒥(u,u) dt для P1 по времени: на слое τ/3·(𝒥(u_k,u_k)+𝒥(u_k,u_{k+1})+𝒥(u_{k+1},u_{k+1}))."""
    return sparse.kron(time_mass(grid), dofmap.restrict(jump_stabilizer_matrix(mesh)), format="csr")


def dt_mass_matrix(mesh: TriMesh, grid: TimeGrid, dofmap: DofMap) -> sparse.csr_matrix:
    """‖h ∂_t u‖²."""
    M = dofmap.restrict(assemble_mass(mesh))
    return (mesh.h**2) * sparse.kron(time_stiffness(grid), M, format="csr")


def constraint_matrix(mesh: TriMesh, grid: TimeGrid, primal: DofMap, dual: DofMap) -> sparse.csr_matrix:
    """G: строки — dof множителя (P0 по времени), столбцы — dof прямой переменной (P1)."""
    E_u, E_z = primal.extension, dual.extension
    M_zu = (E_z.T @ assemble_mass(mesh) @ E_u).tocsr()
    K_zu = (E_z.T @ assemble_stiffness(mesh) @ E_u).tocsr()
    G = sparse.kron(time_difference(grid), M_zu) + sparse.kron(grid.tau * time_average(grid), K_zu)
    return G.tocsr()


def constraint_form_G(u: SpaceTimeField, z: SpaceTimeField, mesh: TriMesh) -> float:
    """
    G(u,z) = Σ_k τ[(∂_t u|_k, z_k) + a(ū_k, z_k)], ū_k = (u_k + u_{k+1})/2.
    Считается послойно по значениям в вершинах, независимо от собранной матрицы G.
    """
    if u.basis != TimeBasis.P1 or z.basis != TimeBasis.P0:
        raise ValueError("G ожидает u ∈ P1Continuous и z ∈ P0Slabwise")
    if u.grid != z.grid:
        raise ValueError(f"сетки по времени не совпадают: {u.grid} и {z.grid}")
    if u.dofmap.n_vertices != mesh.n_vertices or z.dofmap.n_vertices != mesh.n_vertices:
        raise ValueError("поля построены на другой сетке")
    tau = u.grid.tau
    U, Z = u.vertex_values(), z.vertex_values()
    dU = np.diff(U, axis=0) / tau
    U_bar = 0.5 * (U[:-1] + U[1:])
    M, K = assemble_mass(mesh), assemble_stiffness(mesh)
    return float(tau * (np.sum(Z * (M @ dU.T).T) + np.sum(Z * (K @ U_bar.T).T)))


# ========== Стабилизаторы ==========

@dataclass(frozen=True, eq=False)
class StabilizerPair:
    variant: Variant
    mesh: TriMesh
    grid: TimeGrid
    primal: DofMap
    dual: DofMap
    S: sparse.csr_matrix
    S_star: sparse.csr_matrix
    # ‖h∂_t u‖²: входит в полунорму устойчивого варианта отдельно от s
    dt_mass: sparse.csr_matrix

    def s(self, u: SpaceTimeField, v: SpaceTimeField | None = None) -> float:
        v = u if v is None else v
        return float(v.flat @ (self.S @ u.flat))

    def s_star(self, z: SpaceTimeField, w: SpaceTimeField | None = None) -> float:
        w = z if w is None else w
        return float(w.flat @ (self.S_star @ z.flat))

    def seminorm(self, u: SpaceTimeField) -> float:
        base = np.sqrt(max(self.s(u), 0.0))
        if self.variant == Variant.STABLE:
            return float(base + np.sqrt(max(float(u.flat @ (self.dt_mass @ u.flat)), 0.0)))
        return float(base)

    def dual_norm(self, z: SpaceTimeField) -> float:
        return float(np.sqrt(max(self.s_star(z), 0.0)))


def build_stabilizers(variant: Variant, mesh: TriMesh, grid: TimeGrid) -> StabilizerPair:
    variant = Variant(variant)
    kind_u, kind_z = variant_spaces(variant)
    primal, dual = build_dofmap(mesh, kind_u), build_dofmap(mesh, kind_z)
    dt_mass = dt_mass_matrix(mesh, grid, primal)
    slab_identity = grid.tau * sparse.identity(grid.n_slabs, format="csr")

    if variant == Variant.STABLE:
        # s(u,u) = ‖h∇u(0,·)‖²: только первый узел по времени
        first = sparse.csr_matrix(([1.0], ([0], [0])), shape=(grid.n_slabs + 1,) * 2)
        S = (mesh.h**2) * sparse.kron(first, primal.restrict(assemble_stiffness(mesh)), format="csr")
    else:
        S = (jump_time_integral_matrix(mesh, grid, primal) + dt_mass).tocsr()

    if variant == Variant.UNSTABLE_JUMP_DUAL:
        S_star = sparse.kron(slab_identity, dual.restrict(jump_stabilizer_matrix(mesh)), format="csr")
    else:
        S_star = sparse.kron(slab_identity, dual.restrict(assemble_stiffness(mesh)), format="csr")

    return StabilizerPair(variant, mesh, grid, primal, dual, S, S_star, dt_mass)


def omega_norm(u: SpaceTimeField, mesh: TriMesh, omega: Region) -> float:
    M = omega_mass_matrix(mesh, u.grid, omega, u.dofmap)
    return float(np.sqrt(max(float(u.flat @ (M @ u.flat)), 0.0)))


def triple_norm(u: SpaceTimeField, z: SpaceTimeField, pair: StabilizerPair, omega: Region) -> float:
    """⫼(u,z)⫼ = |u|_𝒱 + ‖u‖_ω + ‖z‖_𝒲."""
    return pair.seminorm(u) + omega_norm(u, pair.mesh, omega) + pair.dual_norm(z)


# ========== Нормы ошибок ==========

class NormKind(str, Enum):
    L2L2 = "L2L2"
    L2H1 = "L2H1"
    CINT_L2 = "CinT_L2"
    H1HM1 = "H1Hm1"


@dataclass(frozen=True)
class NormWindow:
    t_a: float
    t_b: float
    region: Region
    kind: NormKind

    def label(self) -> str:
        return f"({self.t_a:g},{self.t_b:g})x{self.region.label()}"


class ExactField(Protocol):
    def u(self, t, x, y): ...
    def grad(self, t, x, y): ...
    def dt(self, t, x, y): ...


def _window_indices(w: NormWindow, mesh: TriMesh, grid: TimeGrid) -> tuple[int, int, np.ndarray]:
    ka, kb = grid.index_of(w.t_a), grid.index_of(w.t_b)
    if kb < ka or (kb == ka and w.kind != NormKind.CINT_L2):
        raise ValueError(f"пустое окно по времени ({w.t_a}, {w.t_b})")
    if mesh.n and not w.region.is_resolved(mesh.n):
        raise ValueError(f"область {w.region.label()} не согласована с сеткой n={mesh.n}")
    return ka, kb, triangles_in_region(mesh, w.region)


def _dual_norm_sq(mesh: TriMesh, r_full: np.ndarray) -> float:
    """‖r‖²_{H^{-1},h} = rᵀ K⁻¹ r на W_h."""
    fac = dirichlet_stiffness(mesh)
    r = r_full[fac.dofmap.dof_vertices]
    return float(r @ fac.solve(r))


def error_norm(e: Union[SpaceTimeField, ExactField], w: NormWindow, mesh: TriMesh, grid: TimeGrid) -> float:
    ka, kb, tris = _window_indices(w, mesh, grid)
    if isinstance(e, SpaceTimeField):
        return _discrete_error_norm(e, w.kind, ka, kb, tris, mesh, grid)
    return _exact_error_norm(e, w.kind, ka, kb, tris, mesh, grid)


def _discrete_error_norm(e: SpaceTimeField, kind: NormKind, ka: int, kb: int, tris: np.ndarray,
                         mesh: TriMesh, grid: TimeGrid) -> float:
    if e.grid != grid or e.dofmap.n_vertices != mesh.n_vertices:
        raise ValueError("поле ошибки построено на другой сетке")
    tau = grid.tau
    V = e.vertex_values()
    M = assemble_mass(mesh, tris)

    if kind == NormKind.CINT_L2:
        rows = range(ka, kb + 1) if e.basis == TimeBasis.P1 else range(ka, max(kb, ka + 1))
        return float(max(np.sqrt(max(V[k] @ (M @ V[k]), 0.0)) for k in rows))

    if kind == NormKind.H1HM1:
        d = time_derivative(e).vertex_values()
        return float(np.sqrt(sum(tau * _dual_norm_sq(mesh, M @ d[k]) for k in range(ka, kb))))

    B = M if kind == NormKind.L2L2 else (M + assemble_stiffness(mesh, tris)).tocsr()
    BV = (B @ V.T).T
    if e.basis == TimeBasis.P0:
        total = tau * float(np.sum(V[ka:kb] * BV[ka:kb]))
    else:
        a, b = slice(ka, kb), slice(ka + 1, kb + 1)
        total = tau / 3.0 * float(np.sum(V[a] * BV[a]) + np.sum(V[a] * BV[b]) + np.sum(V[b] * BV[b]))
    return float(np.sqrt(max(total, 0.0)))


def _exact_error_norm(e: ExactField, kind: NormKind, ka: int, kb: int, tris: np.ndarray,
                      mesh: TriMesh, grid: TimeGrid) -> float:
    tau, nodes = grid.tau, grid.nodes
    xq, wq = quadrature_points(mesh, TRI7, tris)
    x, y = xq[..., 0], xq[..., 1]

    def l2_sq(t: float) -> float:
        return float(np.sum(wq * np.asarray(e.u(t, x, y)) ** 2))

    def h1_sq(t: float) -> float:
        gx, gy = e.grad(t, x, y)
        return l2_sq(t) + float(np.sum(wq * (np.asarray(gx) ** 2 + np.asarray(gy) ** 2)))

    if kind == NormKind.CINT_L2:
        return float(max(np.sqrt(l2_sq(nodes[k])) for k in range(ka, kb + 1)))

    if kind == NormKind.H1HM1:
        total = 0.0
        for k in range(ka, kb):
            t0, t1 = nodes[k], nodes[k + 1]
            r = load_vector(mesh, lambda xx, yy: (e.u(t1, xx, yy) - e.u(t0, xx, yy)) / tau, tris=tris)
            total += tau * _dual_norm_sq(mesh, r)
        return float(np.sqrt(total))

    integrand = l2_sq if kind == NormKind.L2L2 else h1_sq
    total = 0.0
    for k in range(ka, kb):
        for s, ws in zip(SIMPSON_NODES, SIMPSON_WEIGHTS):
            total += tau * ws * integrand(nodes[k] + s * tau)
    return float(np.sqrt(total))
