# heatda/solver.py
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, minres, splu

from . import config
from .assembly import SaddleSystem
from .elements import assemble_mass, assemble_stiffness
from .forms import Variant, jump_stabilizer_matrix, time_mass, time_stiffness
from .mesh import triangles_in_region
from .spaces import SpaceTimeField

ACCEPT_RESIDUAL = 1e-9
ITERATIVE_RTOL = 1e-10
# перезапуски MINRES, если оценка невязки внутри метода разошлась с истинной
MINRES_RESTARTS = 3
METHODS = ("auto", "direct", "iterative")


class SolverError(RuntimeError):
    """
    reason: 'singular' — система вырождена, 'tolerance' — точность не достигнута,
    'resource' — факторизации не хватило памяти.
    """

    def __init__(self, reason: str, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.reason = reason
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolveReport:
    method: str  # 'direct' | 'iterative'
    relative_residual: float
    iterations: Optional[int]
    factor_seconds: float
    solve_seconds: float


def _relative_residual(A: sparse.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    nb = float(np.linalg.norm(b))
    r = float(np.linalg.norm(A @ x - b))
    if nb == 0.0:
        return 0.0 if r == 0.0 else math.inf
    return r / nb


def _factorize(A: sparse.spmatrix, what: str):
    """
    LU с симметричным упорядочением: у седловой матрицы симметричная структура,
    порог 0.1 оставляет ведущие элементы на диагонали, пока это устойчиво.
    Упорядочение фиксировано, повторный расчёт побитово совпадает.
    """
    try:
        return splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1,
                    options={"SymmetricMode": True})
    except RuntimeError as e:
        raise SolverError("singular", f"{what}: факторизация не удалась: {e}") from e
    except (MemoryError, SystemError) as e:
        # SuperLU сообщает о нехватке памяти как SystemError из gstrf
        raise SolverError("resource", f"{what}: не хватило памяти на факторизацию ({type(e).__name__}: {e})") from e


def _solve_direct(A: sparse.spmatrix, b: np.ndarray) -> tuple[np.ndarray, SolveReport]:
    t0 = time.perf_counter()
    lu = _factorize(A, "система")
    t1 = time.perf_counter()
    x = lu.solve(b)
    t2 = time.perf_counter()
    if not np.all(np.isfinite(x)):
        raise SolverError("singular", "решение содержит nan/inf: система вырождена")
    res = _relative_residual(A, x, b)
    return x, SolveReport("direct", res, None, t1 - t0, t2 - t1)


# ========== Предобуславливатели ==========

def block_preconditioner(A: sparse.spmatrix, n_u: int) -> LinearOperator:
    """diag(P, S*)⁻¹ для произвольной седловой матрицы: оба диагональных блока обращаются точно."""
    A = A.tocsr()
    P = A[:n_u, :n_u]
    S_star = -A[n_u:, n_u:]
    lu_p = _factorize(P, "прямой блок") if n_u else None
    lu_z = _factorize(S_star, "двойственный стабилизатор") if S_star.shape[0] else None

    def apply(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        out = np.empty_like(v)
        if lu_p is not None:
            out[:n_u] = lu_p.solve(v[:n_u])
        if lu_z is not None:
            out[n_u:] = lu_z.solve(v[n_u:])
        return out

    return LinearOperator(A.shape, matvec=apply, dtype=float)


def space_time_preconditioner(system: SaddleSystem) -> LinearOperator:
    """
    Предобуславливатель нормы ⫼·⫼ для собранной системы.

    Прямой блок имеет вид M_t ⊗ X₁ + K_t ⊗ X₂. Обобщённая задача K_t φ = λ M_t φ
    (размер N_t+1) раскладывает его по временным модам: обращение сводится к N_t+1
    пространственным факторизациям X₁ + λ_j X₂.
      неустойчивые варианты: X₁ = M_ω + 𝒥, X₂ = h² M — ровно M_ω + S;
      устойчивый: X₁ = M_ω + (h²/T) K, X₂ = h² M — слагаемое ‖h∇u(0)‖² размазано по [0, T],
      ‖h∂_t u‖² взято из полунормы.
    Двойственный блок S* = τI ⊗ Y: одна факторизация Y на все слои.
    """
    pair = system.pair
    mesh, grid, primal = pair.mesh, pair.grid, pair.primal
    M = primal.restrict(assemble_mass(mesh))
    M_om = primal.restrict(assemble_mass(mesh, triangles_in_region(mesh, system.omega)))
    if pair.variant == Variant.STABLE:
        X1 = M_om + (mesh.h**2 / grid.T) * primal.restrict(assemble_stiffness(mesh))
    else:
        X1 = M_om + primal.restrict(jump_stabilizer_matrix(mesh))
    X2 = (mesh.h**2) * M

    lam, Phi = eigh(time_stiffness(grid).toarray(), time_mass(grid).toarray())
    modes = [_factorize((X1 + l * X2).tocsc(), f"временная мода {j}") for j, l in enumerate(lam)]
    n_t, n_s = grid.n_slabs + 1, primal.n_dofs

    m = pair.dual.n_dofs
    Y = (pair.S_star[:m, :m] / grid.tau).tocsc()
    lu_z = _factorize(Y, "двойственный стабилизатор") if m else None
    n_u = system.n_u

    def apply(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        out = np.empty_like(v)
        W = Phi.T @ v[:n_u].reshape(n_t, n_s)
        Z = np.vstack([lu.solve(np.ascontiguousarray(w)) for lu, w in zip(modes, W)])
        out[:n_u] = (Phi @ Z).ravel()
        if lu_z is not None:
            R = np.ascontiguousarray(v[n_u:].reshape(grid.n_slabs, m).T)
            out[n_u:] = (lu_z.solve(R).T / grid.tau).ravel()
        return out

    return LinearOperator(system.matrix.shape, matvec=apply, dtype=float)


# ========== MINRES ==========

def _solve_iterative(A: sparse.spmatrix, b: np.ndarray, M: LinearOperator,
                     factor_seconds: float) -> tuple[np.ndarray, SolveReport]:
    """
    Критерий остановки MINRES — оценка невязки в норме предобуславливателя;
    принимается только истинная ‖b − Ax‖/‖b‖, иначе перезапуск с более жёстким rtol.
    """
    if not np.any(b):
        return np.zeros_like(b), SolveReport("iterative", 0.0, 0, factor_seconds, 0.0)
    maxiter = int(math.ceil(20.0 * math.sqrt(A.shape[0])))
    counter = {"it": 0}

    def _count(_xk):
        counter["it"] += 1

    t0 = time.perf_counter()
    x = np.zeros_like(b, dtype=float)
    res = math.inf
    for attempt in range(MINRES_RESTARTS):
        budget = maxiter - counter["it"]
        if budget <= 0:
            break
        rtol = ITERATIVE_RTOL * 0.01**attempt
        x, info = minres(A, b, x0=x, M=M, rtol=rtol, maxiter=budget, callback=_count)
        res = _relative_residual(A, x, b)
        if res <= ACCEPT_RESIDUAL:
            return x, SolveReport("iterative", res, counter["it"], factor_seconds, time.perf_counter() - t0)
        if info != 0:
            break
        logging.warning("[SOLVER] MINRES stopped at true residual %.2e after %d iterations, restarting",
                        res, counter["it"])
    raise SolverError(
        "tolerance",
        f"MINRES не достиг точности: невязка {res:.3e} за {counter['it']} итераций (лимит {maxiter})",
        residual=res, iterations=counter["it"],
    )


def solve_linear(A: sparse.spmatrix, b: np.ndarray, n_u: int, method: str = "direct",
                 preconditioner: Optional[LinearOperator] = None) -> tuple[np.ndarray, SolveReport]:
    if method == "direct":
        x, report = _solve_direct(A, b)
    elif method == "iterative":
        t0 = time.perf_counter()
        M = preconditioner if preconditioner is not None else block_preconditioner(A, n_u)
        x, report = _solve_iterative(A, b, M, time.perf_counter() - t0)
    else:
        raise ValueError(f"неизвестный метод {method!r}")
    if report.relative_residual > ACCEPT_RESIDUAL:
        raise SolverError("tolerance", f"невязка {report.relative_residual:.3e} > {ACCEPT_RESIDUAL:g}",
                          residual=report.relative_residual)
    return x, report


def resolve_method(method: Optional[str], dimension: int) -> str:
    """'auto': прямой метод до HEATDA_DIRECT_MAX_DIM неизвестных, дальше MINRES."""
    method = (method or config.SOLVER_METHOD).lower()
    if method not in METHODS:
        raise ValueError(f"неизвестный метод {method!r}")
    if method == "auto":
        return "direct" if dimension <= config.DIRECT_MAX_DIM else "iterative"
    return method


def _solve_system(system: SaddleSystem, method: str) -> tuple[np.ndarray, SolveReport]:
    if method == "iterative":
        t0 = time.perf_counter()
        M = space_time_preconditioner(system)
        return _solve_iterative(system.matrix, system.rhs, M, time.perf_counter() - t0)
    return solve_linear(system.matrix, system.rhs, system.n_u, method)


def solve(system: SaddleSystem, method: Optional[str] = None) -> tuple[SpaceTimeField, SpaceTimeField, SolveReport]:
    requested = (method or config.SOLVER_METHOD).lower()
    method = resolve_method(requested, system.dimension)
    try:
        try:
            x, report = _solve_system(system, method)
        except SolverError as e:
            if requested != "auto" or method != "direct" or e.reason != "resource":
                raise
            logging.warning("[SOLVER] direct dim=%d: %s; falling back to MINRES", system.dimension, e)
            method = "iterative"
            x, report = _solve_system(system, method)
    except SolverError as e:
        logging.error("[SOLVER] %s failed (%s): %s", method, e.reason, e)
        raise
    logging.info(
        "[SOLVER] %s dim=%d residual=%.2e factor=%.2fs solve=%.2fs%s",
        method, system.dimension, report.relative_residual, report.factor_seconds, report.solve_seconds,
        f" iterations={report.iterations}" if report.iterations is not None else "",
    )
    u, z = system.split(x)
    return u, z, report
