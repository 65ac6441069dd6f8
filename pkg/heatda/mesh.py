# heatda/mesh.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List

import numpy as np

from .utils import atomic_write_text


class MeshStructureError(ValueError):
    """Сетка не конформна: ребро принадлежит больше чем двум треугольникам и т.п."""


# ========== Типы ==========

@dataclass(frozen=True)
class InternalFace:
    """
    Внутреннее ребро F = K_left ∩ K_right.
    Нормаль единичная и смотрит из левого треугольника в правый.
    """
    vertices: tuple[int, int]
    left: int
    right: int
    normal: tuple[float, float]
    length: float

    def flipped(self) -> "InternalFace":
        a, b = self.vertices
        return InternalFace(
            vertices=(b, a),
            left=self.right,
            right=self.left,
            normal=(-self.normal[0], -self.normal[1]),
            length=self.length,
        )


@dataclass(frozen=True)
class Region:
    """Прямоугольник [x0,x1]×[y0,y1]; треугольник входит, если его барицентр внутри."""
    x0: float
    x1: float
    y0: float
    y1: float

    @classmethod
    def full(cls) -> "Region":
        return cls(0.0, 1.0, 0.0, 1.0)

    @property
    def is_empty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    @property
    def area(self) -> float:
        return 0.0 if self.is_empty else (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.is_empty:
            return np.zeros(pts.shape[0], dtype=bool)
        x, y = pts[:, 0], pts[:, 1]
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def is_resolved(self, n: int, tol: float = 1e-9) -> bool:
        """Все углы лежат на линиях сетки n×n (ω и B — объединения элементов)."""
        corners = np.array([self.x0, self.x1, self.y0, self.y1]) * n
        return bool(np.all(np.abs(corners - np.round(corners)) <= tol))

    def label(self) -> str:
        return f"[{self.x0:g},{self.x1:g}]x[{self.y0:g},{self.y1:g}]"


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Конформная триангуляция единичного квадрата.
    vertices: (nv, 2), triangles: (nt, 3) против часовой стрелки.
    n — число делений стороны для структурированной сетки (0, если сетка произвольная).
    """
    vertices: np.ndarray
    triangles: np.ndarray
    n: int = 0

    def __post_init__(self) -> None:
        # своя копия: массивы вызывающего остаются изменяемыми
        vertices = np.array(self.vertices, dtype=float)
        triangles = np.array(self.triangles, dtype=np.int64)
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Градиенты барицентрических функций: (nt, 3, 2), постоянны на треугольнике."""
        p = self.vertices[self.triangles]
        x, y = p[:, :, 0], p[:, :, 1]
        area2 = 2.0 * self.areas
        g = np.empty((self.n_triangles, 3, 2))
        g[:, 0, 0] = y[:, 1] - y[:, 2]
        g[:, 0, 1] = x[:, 2] - x[:, 1]
        g[:, 1, 0] = y[:, 2] - y[:, 0]
        g[:, 1, 1] = x[:, 0] - x[:, 2]
        g[:, 2, 0] = y[:, 0] - y[:, 1]
        g[:, 2, 1] = x[:, 1] - x[:, 0]
        return g / area2[:, None, None]

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)

    @cached_property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def boundary_vertex_flags(self) -> np.ndarray:
        # граничные вершины: концы рёбер с одним треугольником
        edges, counts = _edge_table(self.triangles)[:2]
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[edges[counts == 1].ravel()] = True
        return flags

    @cached_property
    def internal_faces(self) -> List[InternalFace]:
        return internal_faces(self)

    @cached_property
    def face_arrays(self) -> dict:
        """Векторное представление внутренних рёбер для сборки."""
        faces = self.internal_faces
        return {
            "vertices": np.array([f.vertices for f in faces], dtype=np.int64).reshape(-1, 2),
            "left": np.array([f.left for f in faces], dtype=np.int64),
            "right": np.array([f.right for f in faces], dtype=np.int64),
            "normals": np.array([f.normal for f in faces], dtype=float).reshape(-1, 2),
            "lengths": np.array([f.length for f in faces], dtype=float),
        }

    def quality(self) -> float:
        """max диаметр / min диаметр вписанной окружности."""
        p = self.vertices[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        perimeter = np.linalg.norm(e, axis=2).sum(axis=1)
        inscribed = 4.0 * self.areas / perimeter
        return float(self.h / inscribed.min())

    def locate(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Треугольник и барицентрические координаты точек (только для структурированной сетки).
        Точки на общих рёбрах относятся к любому из соседей: P1-функции там совпадают.
        """
        if self.n < 1:
            raise ValueError("locate работает только для структурированной сетки")
        pts = np.asarray(pts, dtype=float)
        s = pts * self.n
        i = np.clip(np.floor(s[:, 0]).astype(np.int64), 0, self.n - 1)
        j = np.clip(np.floor(s[:, 1]).astype(np.int64), 0, self.n - 1)
        xi = s[:, 0] - i
        eta = s[:, 1] - j
        tri = 2 * (j * self.n + i) + (eta > xi)
        return tri, barycentric(self, tri, pts)


def _edge_table(triangles: np.ndarray):
    """Уникальные (неориентированные) рёбра, число вхождений и обратный индекс."""
    local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    flat = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(flat, axis=0, return_inverse=True, return_counts=True)
    return edges, counts, inverse.reshape(-1), local.reshape(-1, 2)


def barycentric(mesh: TriMesh, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    p = mesh.vertices[mesh.triangles[tri]]
    g = mesh.basis_gradients[tri]
    d = pts - p[:, 0]
    lam1 = np.einsum("ij,ij->i", g[:, 1], d)
    lam2 = np.einsum("ij,ij->i", g[:, 2], d)
    return np.stack([1.0 - lam1 - lam2, lam1, lam2], axis=1)


# ========== Операции ==========

def build_structured_mesh(n: int) -> TriMesh:
    """n×n квадратов, каждый режется одной и той же диагональю: 2n² треугольников, h = √2/n."""
    if int(n) != n or n < 2:
        raise ValueError(f"n должно быть >= 2, получено {n!r}")
    n = int(n)
    ticks = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(ticks, ticks)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (jj * (n + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    mesh = TriMesh(vertices=vertices, triangles=triangles, n=n)
    logging.debug("[MESH] n=%d: %d vertices, %d triangles", n, mesh.n_vertices, mesh.n_triangles)
    return mesh


def internal_faces(mesh: TriMesh) -> List[InternalFace]:
    edges, counts, inverse, directed = _edge_table(mesh.triangles)
    if np.any(counts > 2):
        bad = edges[counts > 2][0]
        raise MeshStructureError(f"ребро {tuple(int(v) for v in bad)} принадлежит {int(counts.max())} треугольникам")

    owner_tri = np.arange(inverse.size) // 3
    order = np.argsort(inverse, kind="stable")
    faces: List[InternalFace] = []
    pos = 0
    for e_idx, cnt in enumerate(counts):
        slots = order[pos:pos + cnt]
        pos += cnt
        if cnt != 2:
            continue
        s_left, s_right = slots
        a, b = (int(v) for v in directed[s_left])
        # в конформной сетке с согласованной ориентацией соседи обходят ребро навстречу
        if tuple(directed[s_right]) != (b, a):
            raise MeshStructureError(f"ребро ({a}, {b}) обходится соседями в одном направлении")
        d = mesh.vertices[b] - mesh.vertices[a]
        length = float(np.hypot(d[0], d[1]))
        faces.append(
            InternalFace(
                vertices=(a, b),
                left=int(owner_tri[s_left]),
                right=int(owner_tri[s_right]),
                # внешняя нормаль левого треугольника при обходе против часовой стрелки
                normal=(float(d[1] / length), float(-d[0] / length)),
                length=length,
            )
        )
    return faces


def triangles_in_region(mesh: TriMesh, r: Region) -> np.ndarray:
    return np.flatnonzero(r.contains(mesh.barycenters))


def dump_mesh(mesh: TriMesh, path: str | Path) -> None:
    """Текстовый дамп: 'nv nt nf', вершины, треугольники, записи рёбер."""
    faces = mesh.internal_faces
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(faces)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    for f in faces:
        lines.append(
            f"{f.vertices[0]} {f.vertices[1]} {f.left} {f.right} "
            f"{f.normal[0]:.17g} {f.normal[1]:.17g} {f.length:.17g}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
