# heatda/elements.py
"""
P1 на треугольниках: квадратуры, локальные матрицы, сборка, вычисление и пролонгация.
Всё векторно по элементам; разреженные матрицы собираются через COO (дубликаты суммируются).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .mesh import TriMesh


@dataclass(frozen=True)
class TriRule:
    bary: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,), сумма = 1 (умножается на площадь)
    order: int


# середины рёбер: точна для многочленов степени 2
TRI3 = TriRule(
    bary=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.full(3, 1.0 / 3.0),
    order=2,
)

_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
# 7-точечное правило Дунаванта, степень 5
TRI7 = TriRule(
    bary=np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
        [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
    ]),
    weights=np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
    order=5,
)

# Симпсон на [0, 1]
SIMPSON_NODES = np.array([0.0, 0.5, 1.0])
SIMPSON_WEIGHTS = np.array([1.0, 4.0, 1.0]) / 6.0

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorFn = Callable[[np.ndarray, np.ndarray], tuple]


def _tri_subset(mesh: TriMesh, tris: Optional[np.ndarray]) -> np.ndarray:
    return np.arange(mesh.n_triangles) if tris is None else np.asarray(tris, dtype=np.int64)


def quadrature_points(mesh: TriMesh, rule: TriRule = TRI7, tris: Optional[np.ndarray] = None):
    """Физические точки (m, nq, 2) и веса с учётом площади (m, nq)."""
    t = _tri_subset(mesh, tris)
    p = mesh.vertices[mesh.triangles[t]]  # (m, 3, 2)
    xq = np.einsum("qk,mkd->mqd", rule.bary, p)
    wq = mesh.areas[t][:, None] * rule.weights[None, :]
    return xq, wq


def _scatter(mesh: TriMesh, t: np.ndarray, local: np.ndarray, size: int) -> sparse.csr_matrix:
    tri = mesh.triangles[t]
    rows = np.broadcast_to(tri[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], local.shape).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_mass(mesh: TriMesh, tris: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    t = _tri_subset(mesh, tris)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.areas[t][:, None, None] * ref[None]
    return _scatter(mesh, t, local, mesh.n_vertices)


def assemble_stiffness(mesh: TriMesh, tris: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    t = _tri_subset(mesh, tris)
    g = mesh.basis_gradients[t]
    local = mesh.areas[t][:, None, None] * np.einsum("mid,mjd->mij", g, g)
    return _scatter(mesh, t, local, mesh.n_vertices)


def load_vector(mesh: TriMesh, f: ScalarFn, rule: TriRule = TRI7,
                tris: Optional[np.ndarray] = None) -> np.ndarray:
    """b_i = ∫ f φ_i по выбранной квадратуре."""
    t = _tri_subset(mesh, tris)
    xq, wq = quadrature_points(mesh, rule, t)
    fq = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float) * np.ones(wq.shape)
    local = np.einsum("mq,qk->mk", fq * wq, rule.bary)
    return np.bincount(mesh.triangles[t].ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def grad_load_vector(mesh: TriMesh, grad_f: VectorFn, rule: TriRule = TRI7,
                     tris: Optional[np.ndarray] = None) -> np.ndarray:
    """b_i = ∫ ∇f·∇φ_i."""
    t = _tri_subset(mesh, tris)
    xq, wq = quadrature_points(mesh, rule, t)
    gx, gy = grad_f(xq[..., 0], xq[..., 1])
    gx = np.asarray(gx, dtype=float) * np.ones(wq.shape)
    gy = np.asarray(gy, dtype=float) * np.ones(wq.shape)
    avg = np.stack([(gx * wq).sum(axis=1), (gy * wq).sum(axis=1)], axis=1)  # (m, 2)
    local = np.einsum("md,mkd->mk", avg, mesh.basis_gradients[t])
    return np.bincount(mesh.triangles[t].ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def p1_values_at(mesh: TriMesh, values: np.ndarray, rule: TriRule,
                 tris: Optional[np.ndarray] = None) -> np.ndarray:
    """Значения P1-функции в квадратурных точках: (m, nq)."""
    t = _tri_subset(mesh, tris)
    return np.einsum("qk,mk->mq", rule.bary, values[mesh.triangles[t]])


def p1_gradients(mesh: TriMesh, values: np.ndarray, tris: Optional[np.ndarray] = None) -> np.ndarray:
    """Постоянный на треугольнике градиент: (m, 2)."""
    t = _tri_subset(mesh, tris)
    return np.einsum("mk,mkd->md", values[mesh.triangles[t]], mesh.basis_gradients[t])


def p1_error(mesh: TriMesh, values: np.ndarray, f: ScalarFn, grad_f: Optional[VectorFn] = None,
             tris: Optional[np.ndarray] = None, rule: TriRule = TRI7) -> tuple[float, float]:
    """
    (‖f − v‖_{L²}, |f − v|_{H¹}) для узлового вектора v; H¹ = nan, если grad_f не задан.
    """
    t = _tri_subset(mesh, tris)
    xq, wq = quadrature_points(mesh, rule, t)
    diff = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float) - p1_values_at(mesh, values, rule, t)
    l2 = float(np.sqrt(np.sum(wq * diff**2)))
    if grad_f is None:
        return l2, float("nan")
    gx, gy = grad_f(xq[..., 0], xq[..., 1])
    gh = p1_gradients(mesh, values, t)
    ex = np.asarray(gx, dtype=float) - gh[:, 0:1]
    ey = np.asarray(gy, dtype=float) - gh[:, 1:2]
    h1 = float(np.sqrt(np.sum(wq * (ex**2 + ey**2))))
    return l2, h1


def evaluate(mesh: TriMesh, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """P1-функция в произвольных точках (структурированная сетка)."""
    tri, lam = mesh.locate(pts)
    return np.einsum("...k,...k->...", lam, values[..., mesh.triangles[tri]])


def gradient_at(mesh: TriMesh, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    tri, _ = mesh.locate(pts)
    return np.einsum("mk,mkd->md", values[mesh.triangles[tri]], mesh.basis_gradients[tri])


def prolongation(coarse: TriMesh, fine: TriMesh) -> sparse.csr_matrix:
    """
    Матрица (nv_fine × nv_coarse): значения грубой P1-функции в вершинах мелкой сетки.
    Для вложенных структурированных сеток это точное вложение пространств.
    """
    tri, lam = coarse.locate(fine.vertices)
    rows = np.repeat(np.arange(fine.n_vertices), 3)
    cols = coarse.triangles[tri].ravel()
    P = sparse.coo_matrix((lam.ravel(), (rows, cols)), shape=(fine.n_vertices, coarse.n_vertices)).tocsr()
    P.eliminate_zeros()
    return P
