# heatda/analysis.py
"""
Прогоны по последовательности сеток, подгонка порядков сходимости, исследование
чувствительности к шуму в данных.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .assembly import DataSpec, PerturbationTarget, assemble_system, export_coordinate
from .elements import SIMPSON_NODES, SIMPSON_WEIGHTS, TRI7, prolongation, quadrature_points
from .forms import (
    NormKind, NormWindow, Variant, build_stabilizers, error_norm, omega_norm, triple_norm,
)
from .mesh import Region, TriMesh, build_structured_mesh
from .schemas import (
    VARIANT_DEFAULTS, ConvergenceReport, ErrorEntry, LevelResult, PerturbationStudy, RateFit, RunConfig,
)
from .solutions import ManufacturedSolution, get_solution
from .solver import solve
from .spaces import (
    SpaceKind, SpaceTimeField, TimeBasis, TimeGrid, build_dofmap, nodal_interpolate, ritz_interpolate,
)


class SweepAborted(RuntimeError):
    """Уровень сетки упал; report (ConvergenceReport или PerturbationStudy) содержит посчитанное."""

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report


# ========== Подгонка порядка ==========

def fit_rate(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Наклон МНК log(error) от log(h) и RMS отклонений от прямой."""
    if len(points) < 3:
        raise ValueError(f"для подгонки нужно >= 3 точек, передано {len(points)}")
    h = np.array([p[0] for p in points], dtype=float)
    e = np.array([p[1] for p in points], dtype=float)
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("шаги и ошибки должны быть положительными")
    lh, le = np.log(h), np.log(e)
    slope, intercept = np.polyfit(lh, le, 1)
    residual = float(np.sqrt(np.mean((le - (slope * lh + intercept)) ** 2)))
    return float(slope), residual


# ========== Нормы точных решений ==========

@dataclass(frozen=True)
class ExactNorms:
    h11: float  # ‖u‖_{(1,1)}
    h02: float  # ‖u‖_{(0,2)}
    f: float  # ‖f‖_{(0,0)}

    @property
    def star(self) -> float:
        return self.h11 + self.h02


def exact_norms(sol: ManufacturedSolution, mesh: TriMesh, grid: TimeGrid) -> ExactNorms:
    """Квадратура 5-го порядка по пространству и Симпсон по слоям."""
    xq, wq = quadrature_points(mesh, TRI7)
    x, y = xq[..., 0], xq[..., 1]

    def sq(v) -> float:
        return float(np.sum(wq * np.asarray(v, dtype=float) ** 2))

    h11 = h02 = ff = 0.0
    tau = grid.tau
    for t0 in grid.nodes[:-1]:
        for s, ws in zip(SIMPSON_NODES, SIMPSON_WEIGHTS):
            t = t0 + s * tau
            u, (gx, gy) = sol.u(t, x, y), sol.grad(t, x, y)
            du, (dgx, dgy) = sol.dt(t, x, y), sol.grad_dt(t, x, y)
            uxx, uxy, uyy = sol.hess(t, x, y)
            h1 = sq(u) + sq(gx) + sq(gy)
            w = tau * ws
            h11 += w * (h1 + sq(du) + sq(dgx) + sq(dgy))
            h02 += w * (h1 + sq(uxx) + 2.0 * sq(uxy) + sq(uyy))
            ff += w * sq(sol.f(t, x, y))
    return ExactNorms(float(np.sqrt(h11)), float(np.sqrt(h02)), float(np.sqrt(ff)))


# ========== Один уровень ==========

@dataclass(frozen=True)
class SweepSettings:
    T: float
    omega: Region
    c_t: float = 1.0
    seed: int = 0
    target: PerturbationTarget = PerturbationTarget.BOTH
    method: Optional[str] = None
    ref_levels: int = 2

    @classmethod
    def defaults(cls, variant: Variant, **overrides) -> "SweepSettings":
        d = VARIANT_DEFAULTS[Variant(variant)]
        params = {"T": d["T"], "omega": Region(*d["omega"])}
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "SweepSettings":
        return cls(T=cfg.T, omega=cfg.omega.region(), c_t=cfg.c_t, seed=cfg.seed,
                   target=cfg.target, method=cfg.method)


def default_windows(variant: Variant) -> List[NormWindow]:
    d = VARIANT_DEFAULTS[Variant(variant)]
    t_end = d["T"] if d["T2"] is None else d["T2"]
    region = Region(*d["B"])
    return [NormWindow(d["T1"], t_end, region, kind) for kind in d["norms"]]


def config_windows(cfg: RunConfig) -> List[NormWindow]:
    return [NormWindow(cfg.T1, cfg.window_end, cfg.B.region(), kind) for kind in cfg.norms]


def reference_error(u_h: SpaceTimeField, sol: ManufacturedSolution, mesh: TriMesh,
                    ref: TriMesh) -> SpaceTimeField:
    """u_h − I_ref u на вложенной мелкой сетке; грубое P1-поле переносится точно."""
    P = prolongation(mesh, ref)
    grid = u_h.grid
    fine = (P @ u_h.vertex_values().T).T
    x, y = ref.vertices[:, 0], ref.vertices[:, 1]
    exact = np.array([np.asarray(sol.u(t, x, y), dtype=float) * np.ones(ref.n_vertices) for t in grid.nodes])
    return SpaceTimeField(TimeBasis.P1, build_dofmap(ref, SpaceKind.FULL), grid, fine - exact)


def projected_solution(variant: Variant, sol: ManufacturedSolution, mesh: TriMesh, grid: TimeGrid) -> SpaceTimeField:
    """π_h u: узловая интерполяция (неустойчивый вариант) или проекция Ритца (устойчивый)."""
    if variant == Variant.STABLE:
        return ritz_interpolate(sol.u, sol.grad, mesh, grid)
    return nodal_interpolate(sol.u, mesh, grid, SpaceKind.FULL)


def run_level(variant: Variant, sol: ManufacturedSolution, n: int, windows: Sequence[NormWindow],
              delta: float, settings: SweepSettings) -> LevelResult:
    mesh = build_structured_mesh(n)
    grid = TimeGrid.for_mesh(settings.T, n, settings.c_t)
    pair = build_stabilizers(variant, mesh, grid)
    data = DataSpec(sol.id, delta=delta, seed=settings.seed, target=settings.target)
    system = assemble_system(mesh, grid, pair, settings.omega, data)
    if config.EXPORT_MATRICES:
        export_coordinate(system.matrix, Path(config.OUTPUT_DIR) / "matrices" / f"A_{variant.value}_n{n}.txt")
    u_h, z_h, report = solve(system, settings.method)

    ref = build_structured_mesh(n * 2 ** settings.ref_levels)
    err = reference_error(u_h, sol, mesh, ref)
    errors = [ErrorEntry(norm_kind=w.kind, window=w.label(), value=error_norm(err, w, ref, grid)) for w in windows]

    diff = u_h - projected_solution(variant, sol, mesh, grid)
    omega_window = NormWindow(0.0, settings.T, settings.omega, NormKind.L2L2)
    diagnostics = {
        "tnorm": triple_norm(diff, z_h, pair, settings.omega),
        "V_seminorm": pair.seminorm(diff),
        "omega_seminorm": omega_norm(diff, mesh, settings.omega),
        "z_W": pair.dual_norm(z_h),
        "omega_error": error_norm(err, omega_window, ref, grid),
    }
    pert = system.perturbation
    logging.info(
        "[SWEEP] %s %s n=%d: %s", variant.value, sol.id, n,
        ", ".join(f"{e.norm_kind.value}={e.value:.4e}" for e in errors),
    )
    return LevelResult(
        n=n, h=mesh.h, tau=grid.tau, errors=errors, diagnostics=diagnostics,
        residual=report.relative_residual, iterations=report.iterations,
        q_noise_norm=pert.q_noise_norm if pert else 0.0,
        f_noise_norm=pert.f_noise_norm if pert else 0.0,
    )


def _fit_report(report: ConvergenceReport, windows: Sequence[NormWindow]) -> None:
    if len(report.levels) < 3:
        return
    for w in windows:
        pts = report.series(w.kind, w.label())
        if all(v > 0 for _, v in pts):
            rate, res = fit_rate(pts)
            key = f"{w.kind.value}@{w.label()}"
            report.rates[key] = RateFit(label=key, rate=rate, residual=res)
    for name in report.levels[0].diagnostics:
        pts = [(lv.h, lv.diagnostics[name]) for lv in report.levels]
        if all(v > 0 for _, v in pts):
            rate, res = fit_rate(pts)
            report.diagnostic_rates[name] = RateFit(label=name, rate=rate, residual=res)


# ========== Прогоны ==========

def _check_sweep(variant: Variant, sol: ManufacturedSolution, n_list: Sequence[int]) -> None:
    if len(n_list) < 4 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"n-list должен строго возрастать и содержать >= 4 уровней: {list(n_list)}")
    if variant == Variant.STABLE and not sol.boundary_compatible:
        raise ValueError(f"решение {sol.id} не совместимо с условием Дирихле (устойчивый вариант)")


def run_convergence(variant: Variant, solution_id: str, n_list: Sequence[int],
                    windows: Optional[Sequence[NormWindow]] = None, delta: float = 0.0,
                    settings: Optional[SweepSettings] = None, max_workers: Optional[int] = None,
                    check: bool = True) -> ConvergenceReport:
    """
    Уровни считаются параллельно (у уровней нет общего состояния),
    отчёт собирается по возрастанию n. Падение уровня прерывает прогон, посчитанное сохраняется.
    """
    variant = Variant(variant)
    sol = get_solution(solution_id)
    if check:
        _check_sweep(variant, sol, n_list)
    windows = list(windows or default_windows(variant))
    settings = settings or SweepSettings.defaults(variant)
    report = ConvergenceReport(variant=variant, solution=sol.id, delta=delta)

    workers = max(1, min(max_workers or config.MAX_WORKERS, len(n_list)))
    failure: Optional[str] = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(n, pool.submit(run_level, variant, sol, n, windows, delta, settings)) for n in n_list]
        for n, fut in futures:
            if failure is not None:
                fut.cancel()
                continue
            try:
                report.levels.append(fut.result())
            except Exception as e:
                logging.exception("[SWEEP] level n=%d failed", n)
                failure = f"n={n}: {e}"

    _fit_report(report, windows)
    if failure is not None:
        report.partial = True
        report.failure = failure
        raise SweepAborted(f"прогон прерван на уровне {failure}", report)
    return report


def stagnation_h(h_list: Sequence[float], errors: Sequence[float]) -> float:
    """h*(δ): шаг, на котором ошибка минимальна."""
    return float(h_list[int(np.argmin(errors))])


def _perturbation_table(variant: Variant, solution_id: str, window: NormWindow, n_list: Sequence[int],
                        delta_list: Sequence[float], columns: Sequence[ConvergenceReport]) -> PerturbationStudy:
    """Таблица уровень × δ; клетки непосчитанных уровней и столбцов пустые (None)."""
    by_n = [{lv.n: lv for lv in col.levels} for col in columns]
    h_list: List[Optional[float]] = []
    tau_list: List[Optional[float]] = []
    errors: List[List[Optional[float]]] = []
    for n in n_list:
        found = [col[n] for col in by_n if n in col]
        h_list.append(found[0].h if found else None)
        tau_list.append(found[0].tau if found else None)
        errors.append([col[n].errors[0].value if n in col else None for col in by_n]
                      + [None] * (len(delta_list) - len(by_n)))
    h_star: List[Optional[float]] = []
    for j, delta in enumerate(delta_list):
        column = [row[j] for row in errors]
        complete = j < len(columns) and not columns[j].partial
        h_star.append(stagnation_h(h_list, column) if delta > 0 and complete else None)
    return PerturbationStudy(
        variant=variant, solution=solution_id, norm_kind=window.kind, window=window.label(),
        n_list=list(n_list), h_list=h_list, tau_list=tau_list,
        delta_list=list(delta_list), errors=errors, h_star=h_star,
    )


def run_perturbation_study(variant: Variant, solution_id: str, n_list: Sequence[int],
                           delta_list: Sequence[float], window: Optional[NormWindow] = None,
                           settings: Optional[SweepSettings] = None,
                           max_workers: Optional[int] = None) -> PerturbationStudy:
    """Столбец на каждое δ; падение уровня прерывает исследование, посчитанные клетки сохраняются."""
    variant = Variant(variant)
    window = window or default_windows(variant)[0]
    columns: List[ConvergenceReport] = []
    for delta in delta_list:
        try:
            columns.append(run_convergence(variant, solution_id, n_list, [window], delta, settings, max_workers))
        except SweepAborted as e:
            columns.append(e.report)
            study = _perturbation_table(variant, solution_id, window, n_list, delta_list, columns)
            study.partial = True
            study.failure = f"δ={delta:g}, {e.report.failure}"
            raise SweepAborted(f"исследование прервано: {study.failure}", study) from e
    return _perturbation_table(variant, solution_id, window, n_list, delta_list, columns)


def constant_growth(values_by_n: Dict[int, float]) -> float:
    """Отношение значения на самом мелком уровне к значению на самом грубом."""
    ns = sorted(values_by_n)
    first = values_by_n[ns[0]]
    return float(values_by_n[ns[-1]] / first) if first > 0 else float("inf")
