# heatda/checks.py
"""
Набор проверок инвариантов для `verify`: быстрые тождества и симметрия (n ≤ 16),
полный набор добавляет порядки сходимости и отслеживание констант до n = 64.
Те же функции вызываются из тестов.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .analysis import constant_growth, exact_norms, fit_rate, run_convergence, run_perturbation_study
from .assembly import (
    DataSpec, alpha_certificate, assemble_system, coercivity_gap, lagrangian,
)
from .elements import TRI7, assemble_mass, assemble_stiffness, grad_load_vector, p1_error, prolongation
from .forms import (
    NormKind, NormWindow, Variant, build_stabilizers, constraint_form_G, error_norm,
    face_jump_pairing, jump_stabilizer_matrix, triple_norm,
)
from .mesh import Region, build_structured_mesh, triangles_in_region
from .solutions import builtin_solutions, get_solution
from .solver import solve
from .spaces import (
    SpaceKind, SpaceTimeField, TimeBasis, TimeGrid, build_dofmap, dirichlet_stiffness,
    interpolate_vertices, nodal_interpolate, ritz_interpolate, ritz_project,
)
from .utils import rng_for

QUICK, FULL = "quick", "full"
# ω для проверок тождеств: совпадает с линиями сетки уже при n = 4
CHECK_OMEGA = Region(0.25, 0.75, 0.25, 0.75)
RATE_LEVELS = (8, 16, 32, 64)
ALL_VARIANTS = (Variant.UNSTABLE, Variant.STABLE, Variant.UNSTABLE_JUMP_DUAL)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class Check:
    name: str
    level: str
    fn: Callable[[], tuple[bool, str]]

    def run(self) -> CheckResult:
        t0 = time.perf_counter()
        try:
            ok, detail = self.fn()
        except Exception as e:
            logging.exception("[VERIFY] %s raised", self.name)
            ok, detail = False, f"{type(e).__name__}: {e}"
        return CheckResult(self.name, bool(ok), detail, time.perf_counter() - t0)


def _random_fields(system, rng) -> tuple[SpaceTimeField, SpaceTimeField]:
    u, z = system.split(np.concatenate([rng.standard_normal(system.n_u), rng.standard_normal(system.n_z)]))
    return u, z


def _system(variant: Variant, n: int, n_slabs: int, solution_id: str = "Z0", omega: Region = CHECK_OMEGA,
            T: float = 1.0):
    mesh = build_structured_mesh(n)
    grid = TimeGrid(T, n_slabs)
    pair = build_stabilizers(variant, mesh, grid)
    return assemble_system(mesh, grid, pair, omega, DataSpec(solution_id))


def _first_failure(failures: List[str], summary: str) -> tuple[bool, str]:
    if failures:
        return False, f"{len(failures)} нарушений, первое: {failures[0]}"
    return True, summary


# ========== Быстрые проверки ==========

def check_symmetry() -> tuple[bool, str]:
    failures, worst = [], 0.0
    for variant in ALL_VARIANTS:
        system = _system(variant, 4, 4)
        mesh = system.pair.mesh
        mats = {
            "mass": assemble_mass(mesh), "stiffness": assemble_stiffness(mesh),
            "jump": jump_stabilizer_matrix(mesh), "S": system.pair.S, "S*": system.pair.S_star,
            "A": system.matrix,
        }
        for name, M in mats.items():
            d = abs(M - M.T).max() if M.nnz else 0.0
            worst = max(worst, float(d))
            if d > 1e-13:
                failures.append(f"{variant.value}: {name} несимметрична, max|M−Mᵀ| = {d:.2e}")
    return _first_failure(failures, f"max|M−Mᵀ| = {worst:.1e}")


def check_g_transpose() -> tuple[bool, str]:
    failures = []
    for variant in ALL_VARIANTS:
        system = _system(variant, 4, 4)
        A, n_u = system.matrix.tocsr(), system.n_u
        upper, lower = A[:n_u, n_u:], A[n_u:, :n_u]
        diff = (upper - lower.T).tocsr()
        diff.eliminate_zeros()
        if diff.nnz:
            failures.append(f"{variant.value}: блок Gᵀ не совпадает с транспонированным G ({diff.nnz} элементов)")
    return _first_failure(failures, "Gᵀ = (G)ᵀ во всех вариантах")


def check_coercivity_identity(n_pairs: int = 50, seed: int = 0) -> tuple[bool, str]:
    """A[(u,z),(u,−z)] = ‖u‖²_ω + s(u,u) + s*(z,z)."""
    failures, worst = [], 0.0
    for variant in ALL_VARIANTS:
        for n in (4, 8):
            for n_slabs in (4, 8):
                system = _system(variant, n, n_slabs)
                rng = rng_for(seed, 10, n, n_slabs)
                for i in range(n_pairs):
                    u, z = _random_fields(system, rng)
                    lhs, rhs = coercivity_gap(system, u, z)
                    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
                    worst = max(worst, rel)
                    if rel > 1e-12:
                        failures.append(f"{variant.value} n={n} N_t={n_slabs} пара {i}: rel = {rel:.2e}")
    return _first_failure(failures, f"max rel = {worst:.1e}")


def check_integration_by_parts(n_pairs: int = 20, seed: int = 0) -> tuple[bool, str]:
    """(∇u,∇v) = Σ_F ∫_F [n·∇u] v для u ∈ V_h, v ∈ W_h."""
    failures, worst = [], 0.0
    for n in (4, 8, 16):
        mesh = build_structured_mesh(n)
        K = assemble_stiffness(mesh)
        interior = ~mesh.boundary_vertex_flags
        rng = rng_for(seed, 11, n)
        for i in range(n_pairs):
            u = rng.standard_normal(mesh.n_vertices)
            v = np.where(interior, rng.standard_normal(mesh.n_vertices), 0.0)
            lhs = float(v @ (K @ u))
            rhs = face_jump_pairing(mesh, u, v)
            rel = abs(lhs - rhs) / max(abs(lhs), 1.0)
            worst = max(worst, rel)
            if rel > 1e-12:
                failures.append(f"n={n} пара {i}: {lhs:.15g} против {rhs:.15g}")
    return _first_failure(failures, f"max rel = {worst:.1e}")


def check_constraint_form(n_pairs: int = 10, seed: int = 0) -> tuple[bool, str]:
    """Собранная матрица G против послойного вычисления G(u,z)."""
    failures = []
    for variant in ALL_VARIANTS:
        system = _system(variant, 8, 4)
        rng = rng_for(seed, 12, int(variant.is_unstable))
        for i in range(n_pairs):
            u, z = _random_fields(system, rng)
            a = float(z.flat @ (system.G @ u.flat))
            b = constraint_form_G(u, z, system.pair.mesh)
            if abs(a - b) > 1e-12 * max(abs(a), 1.0):
                failures.append(f"{variant.value} пара {i}: {a:.15g} против {b:.15g}")
    return _first_failure(failures, "матрица G совпадает с формой")


def check_zero_data() -> tuple[bool, str]:
    failures = []
    for variant in ALL_VARIANTS:
        system = _system(variant, 8, 4)
        u, z, report = solve(system, "direct")
        if np.any(system.rhs) or np.any(u.coeffs) or np.any(z.coeffs) or report.relative_residual != 0.0:
            failures.append(f"{variant.value}: нулевые данные дали ненулевое решение")
    return _first_failure(failures, "нулевые данные → нулевое решение, невязка 0")


def check_heat_residuals(n_points: int = 100, seed: int = 0) -> tuple[bool, str]:
    rng = rng_for(seed, 13)
    t, x, y = rng.uniform(0.0, 1.0, size=(3, n_points))
    failures, worst = [], 0.0
    for sol in builtin_solutions():
        r = float(np.max(np.abs(sol.heat_residual(t, x, y))))
        worst = max(worst, r)
        if r > 1e-10:
            failures.append(f"{sol.id}: |∂_t u − Δu − f| = {r:.2e}")
        if sol.boundary_compatible:
            edge = np.concatenate([np.zeros(10), np.ones(10)])
            s = rng.uniform(0.0, 1.0, size=20)
            b = max(np.max(np.abs(sol.u(0.3, edge, s))), np.max(np.abs(sol.u(0.3, s, edge))))
            if b > 1e-12:
                failures.append(f"{sol.id}: помечено совместимым, но |u|∂Ω = {b:.2e}")
    return _first_failure(failures, f"max residual = {worst:.1e}")


def check_lagrangian_critical_point(n_dirs: int = 10, seed: int = 0) -> tuple[bool, str]:
    """Решение системы — стационарная точка лагранжиана: производные по направлениям равны нулю."""
    failures = []
    for variant, sol_id in ((Variant.UNSTABLE, "U1"), (Variant.STABLE, "S2")):
        system = _system(variant, 8, 4, sol_id)
        u, z, _ = solve(system, "direct")
        rng = rng_for(seed, 14, int(variant.is_unstable))
        scale = abs(lagrangian(system, u, z)) + 1.0
        for i in range(n_dirs):
            du, dz = _random_fields(system, rng)
            deriv = 0.5 * (lagrangian(system, u + du, z + dz) - lagrangian(system, u - du, z - dz))
            if abs(deriv) > 1e-8 * scale:
                failures.append(f"{variant.value} направление {i}: dL = {deriv:.2e}")
    return _first_failure(failures, "градиент лагранжиана в решении равен нулю")


def check_dimensions() -> tuple[bool, str]:
    system = _system(Variant.UNSTABLE, 4, 4)
    expected = 5 * 25 + 4 * 9
    if system.dimension != expected:
        return False, f"размерность {system.dimension}, ожидалась {expected}"
    return True, f"dim = {expected}"


# ========== Полные проверки ==========

def _sin_sin(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _sin_sin_grad(x, y):
    return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y), np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)


def _in_band(rate: float, target: float, tol: float) -> bool:
    return abs(rate - target) <= tol


def check_interpolation_rates() -> tuple[bool, str]:
    l2, h1, ritz = [], [], []
    for n in RATE_LEVELS:
        mesh = build_structured_mesh(n)
        v = interpolate_vertices(_sin_sin, mesh)
        e0, e1 = p1_error(mesh, v, _sin_sin, _sin_sin_grad)
        l2.append((mesh.h, e0))
        h1.append((mesh.h, e1))
        coeffs = ritz_project(_sin_sin, _sin_sin_grad, mesh)
        r = build_dofmap(mesh, SpaceKind.DIRICHLET).extension @ coeffs
        ritz.append((mesh.h, p1_error(mesh, r, _sin_sin, _sin_sin_grad)[1]))
    rates = [fit_rate(l2)[0], fit_rate(h1)[0], fit_rate(ritz)[0]]
    ok = _in_band(rates[0], 2.0, 0.15) and _in_band(rates[1], 1.0, 0.15) and _in_band(rates[2], 1.0, 0.15)
    return ok, "L2 {:.3f}, H1 {:.3f}, Ritz H1 {:.3f}".format(*rates)


def check_jump_rate() -> tuple[bool, str]:
    pts = []
    for n in RATE_LEVELS:
        mesh = build_structured_mesh(n)
        v = interpolate_vertices(_sin_sin, mesh)
        pts.append((mesh.h, float(v @ (jump_stabilizer_matrix(mesh) @ v))))
    rate = fit_rate(pts)[0]
    return _in_band(rate, 2.0, 0.3), f"rate {rate:.3f}"


def _poincare_library(mesh, rng) -> List[np.ndarray]:
    lib = [interpolate_vertices(sol.at(0.5), mesh) for sol in builtin_solutions() if sol.id != "Z0"]
    lib.append(interpolate_vertices(lambda x, y: np.ones_like(x), mesh))
    lib.append(interpolate_vertices(lambda x, y: x - 2.0 * y, mesh))
    lib.extend(rng.standard_normal(mesh.n_vertices) for _ in range(20))
    return lib


def check_discrete_poincare(seed: int = 0) -> tuple[bool, str]:
    """h‖u‖ ≤ C(𝒥(u,u)^{1/2} + ‖u‖_{L²(ω)}) с одной константой на всех уровнях."""
    omega = Region(0.375, 0.625, 0.375, 0.625)
    worst = {}
    for n in RATE_LEVELS:
        mesh = build_structured_mesh(n)
        M, J = assemble_mass(mesh), jump_stabilizer_matrix(mesh)
        M_om = assemble_mass(mesh, triangles_in_region(mesh, omega))
        q = 0.0
        for v in _poincare_library(mesh, rng_for(seed, 15, n)):
            denom = np.sqrt(max(v @ (J @ v), 0.0)) + np.sqrt(max(v @ (M_om @ v), 0.0))
            q = max(q, mesh.h * np.sqrt(v @ (M @ v)) / denom)
        worst[n] = float(q)
    growth = constant_growth(worst)
    return growth <= 1.5, f"max C = {max(worst.values()):.3e}, рост {growth:.2f}"


def _vs_ratio(variant: Variant, sol, n: int, T: float) -> float:
    mesh = build_structured_mesh(n)
    grid = TimeGrid.for_mesh(T, n)
    pair = build_stabilizers(variant, mesh, grid)
    if variant == Variant.STABLE:
        u = ritz_interpolate(sol.u, sol.grad, mesh, grid)
    else:
        u = nodal_interpolate(sol.u, mesh, grid, SpaceKind.FULL)
    return pair.seminorm(u) / (mesh.h * exact_norms(sol, mesh, grid).star)


def check_seminorm_upper() -> tuple[bool, str]:
    """|π_h u|_𝒱 / (h‖u‖_*) ограничено при измельчении."""
    failures, growths = [], []
    cases = [(Variant.UNSTABLE, s, 1.0) for s in ("U1", "U2", "S1", "S2")]
    cases += [(Variant.STABLE, s, 0.5) for s in ("S1", "S2")]
    for variant, sid, T in cases:
        ratios = {n: _vs_ratio(variant, get_solution(sid), n, T) for n in RATE_LEVELS[:3]}
        g = constant_growth(ratios)
        growths.append(g)
        if g > 1.5:
            failures.append(f"{variant.value} {sid}: рост отношения {g:.2f}")
    return _first_failure(failures, f"max рост {max(growths):.2f}")


def _h01_norm(sol, mesh, grid) -> float:
    return error_norm(sol, NormWindow(0.0, grid.T, Region.full(), NormKind.L2H1), mesh, grid)


def check_dual_upper() -> tuple[bool, str]:
    """‖π_h z‖_𝒲 ≤ C‖z‖_{(0,1)} для гладких z из W."""
    failures, worst = [], 0.0
    for variant in ALL_VARIANTS:
        for sid in ("S1", "S2"):
            sol = get_solution(sid)
            ratios = {}
            for n in RATE_LEVELS[:3]:
                mesh, grid = build_structured_mesh(n), TimeGrid.for_mesh(1.0, n)
                pair = build_stabilizers(variant, mesh, grid)
                z = nodal_interpolate(sol.u, mesh, grid, SpaceKind.DIRICHLET, TimeBasis.P0)
                ratios[n] = pair.dual_norm(z) / _h01_norm(sol, mesh, grid)
            worst = max(worst, max(ratios.values()))
            if constant_growth(ratios) > 1.5:
                failures.append(f"{variant.value} {sid}: {ratios}")
    return _first_failure(failures, f"max C = {worst:.3f}")


def check_constraint_lower() -> tuple[bool, str]:
    """
    |G(u, z − π_h z)| ≤ C|u|_𝒱‖z‖_{(0,1)}: z − π_h z считается на вложенной сетке в 4 раза мельче,
    u = π_h U1 продолжается туда точно.
    """
    sol_u, sol_z = get_solution("U1"), get_solution("S2")
    ratios = {}
    for n in RATE_LEVELS[:3]:
        mesh, ref = build_structured_mesh(n), build_structured_mesh(4 * n)
        grid = TimeGrid.for_mesh(1.0, n)
        pair = build_stabilizers(Variant.UNSTABLE, mesh, grid)
        u = nodal_interpolate(sol_u.u, mesh, grid, SpaceKind.FULL)
        P = prolongation(mesh, ref)
        u_ref = SpaceTimeField(TimeBasis.P1, build_dofmap(ref, SpaceKind.FULL), grid,
                               (P @ u.vertex_values().T).T)
        z_ref = nodal_interpolate(sol_z.u, ref, grid, SpaceKind.DIRICHLET, TimeBasis.P0)
        z_h = nodal_interpolate(sol_z.u, mesh, grid, SpaceKind.DIRICHLET, TimeBasis.P0)
        z_h_ref = (P @ z_h.vertex_values().T).T[:, z_ref.dofmap.dof_vertices]
        g = constraint_form_G(u_ref, z_ref - z_ref.like(z_h_ref), ref)
        ratios[n] = abs(g) / (pair.seminorm(u) * _h01_norm(sol_z, mesh, grid))
    growth = constant_growth(ratios)
    return growth <= 1.5, f"C по уровням {[f'{v:.2e}' for v in ratios.values()]}, рост {growth:.2f}"


def check_ritz_orthogonality(n_funcs: int = 10, seed: int = 0) -> tuple[bool, str]:
    """(∇(f − π_h f), ∇v) = 0 для всех v ∈ W_h: в G(u − π_h u, z) остаётся только массовая часть."""
    failures, worst = [], 0.0
    for n in (8, 16):
        mesh = build_structured_mesh(n)
        fac = dirichlet_stiffness(mesh)
        rng = rng_for(seed, 16, n)
        for i in range(n_funcs):
            a, b = rng.integers(1, 4, size=2)
            c = rng.uniform(0.5, 2.0)

            def f(x, y, a=a, b=b, c=c):
                return c * np.sin(a * np.pi * x) * np.sin(b * np.pi * y)

            def grad_f(x, y, a=a, b=b, c=c):
                return (c * a * np.pi * np.cos(a * np.pi * x) * np.sin(b * np.pi * y),
                        c * b * np.pi * np.sin(a * np.pi * x) * np.cos(b * np.pi * y))

            rhs = grad_load_vector(mesh, grad_f, TRI7)[fac.dofmap.dof_vertices]
            r = float(np.linalg.norm(fac.K @ ritz_project(f, grad_f, mesh) - rhs) / np.linalg.norm(rhs))
            worst = max(worst, r)
            if r > 1e-10:
                failures.append(f"n={n} f={c:.2f}·sin({a}πx)sin({b}πy): невязка {r:.2e}")
    return _first_failure(failures, f"max невязка {worst:.1e}")


def check_alpha_certificate(seed: int = 0) -> tuple[bool, str]:
    out = []
    for n in (8, 16):
        system = _system(Variant.STABLE, n, n // 2, T=0.5)
        alpha, c = alpha_certificate(system, rng_for(seed, 17, n))
        out.append((n, alpha, c))
    ok = all(c >= 0.1 for _, _, c in out)
    return ok, "; ".join(f"n={n}: α={a:g}, c={c:.3f}" for n, a, c in out)


def check_direct_vs_iterative() -> tuple[bool, str]:
    failures, worst = [], 0.0
    for variant, sid, T in ((Variant.UNSTABLE, "U1", 1.0), (Variant.STABLE, "S1", 0.5),
                            (Variant.UNSTABLE_JUMP_DUAL, "U2", 1.0)):
        for n in (8, 16):
            system = _system(variant, n, int(T * n), sid, CHECK_OMEGA, T)
            u_d, z_d, _ = solve(system, "direct")
            u_i, z_i, rep = solve(system, "iterative")
            d = triple_norm(u_d - u_i, z_d - z_i, system.pair, system.omega)
            worst = max(worst, d)
            if d > 1e-8:
                failures.append(f"{variant.value} n={n}: ⫼разница⫼ = {d:.2e} ({rep.iterations} итераций)")
    return _first_failure(failures, f"max ⫼разница⫼ = {worst:.1e}")


# ⫼(u_h − π_h u, z_h)⫼, ‖z_h‖_𝒲 и ‖u_h − u‖_ω сходятся с порядком не ниже 0.9 в обоих вариантах
DIAGNOSTIC_FLOOR = 0.9
DIAGNOSTIC_RATES = ("tnorm", "z_W", "omega_error")


def diagnostic_rate_failures(report) -> List[str]:
    failures = []
    for name in DIAGNOSTIC_RATES:
        fit = report.diagnostic_rates.get(name)
        if fit is None:
            failures.append(f"{name}: нет порядка")
        elif fit.rate < DIAGNOSTIC_FLOOR:
            failures.append(f"{name} rate {fit.rate:.3f} < {DIAGNOSTIC_FLOOR}")
    return failures


def _diagnostic_summary(report) -> str:
    return ", ".join(f"{name} {report.diagnostic_rates[name].rate:.3f}"
                     for name in DIAGNOSTIC_RATES if name in report.diagnostic_rates)


def check_stable_convergence() -> tuple[bool, str]:
    report = run_convergence(Variant.STABLE, "S1", RATE_LEVELS)
    rates = {k: r.rate for k, r in report.rates.items()}
    failures = [f"{k} rate {v:.3f} < 0.9" for k, v in sorted(rates.items()) if v < 0.9]
    if len(rates) != 3:
        failures.append(f"ожидалось 3 порядка, получено {len(rates)}")
    failures += diagnostic_rate_failures(report)
    summary = ", ".join(f"{k}: {v:.3f}" for k, v in sorted(rates.items()))
    return _first_failure(failures, f"{summary}; {_diagnostic_summary(report)}")


def check_unstable_convergence() -> tuple[bool, str]:
    report = run_convergence(Variant.UNSTABLE, "U1", RATE_LEVELS)
    errs = [lv.errors[0].value for lv in report.levels]
    rate = next(iter(report.rates.values())).rate
    failures = []
    if not all(b < a for a, b in zip(errs, errs[1:])):
        failures.append(f"ошибки не убывают: {[f'{e:.4e}' for e in errs]}")
    if not 0.25 <= rate <= 1.1:
        failures.append(f"rate {rate:.3f} вне [0.25, 1.1]")
    failures += diagnostic_rate_failures(report)
    return _first_failure(failures, f"rate {rate:.3f}; {_diagnostic_summary(report)}")


def stagnation_verdict(errors: Sequence[float]) -> tuple[bool, bool]:
    """
    (interior, flat): минимум ошибки не на крайнем уровне, и последнее измельчение
    уменьшает ошибку не больше чем на 10%.
    """
    e = np.asarray(errors, dtype=float)
    k = int(np.argmin(e))
    return 0 < k < e.size - 1, bool(e[-1] >= 0.9 * e[-2])


def check_noise_stagnation(delta: float = 1e-3) -> tuple[bool, str]:
    noisy = run_convergence(Variant.UNSTABLE, "U1", RATE_LEVELS, delta=delta)
    clean = run_convergence(Variant.UNSTABLE, "U1", RATE_LEVELS, delta=0.0)
    e = [lv.errors[0].value for lv in noisy.levels]
    c = [lv.errors[0].value for lv in clean.levels]
    interior, flat = stagnation_verdict(e)
    k = int(np.argmin(e))
    clean_decreasing = all(b < a for a, b in zip(c, c[1:]))
    return interior and flat and clean_decreasing, (
        f"δ={delta:g}: минимум на n={RATE_LEVELS[k]}, e(n_max)/e(n_prev) = {e[-1] / e[-2]:.2f}; "
        f"δ=0 убывает: {clean_decreasing}"
    )


# удвоение δ не уменьшает уровень стагнации больше чем на шум подгонки
DELTA_DOUBLING_SLACK = 0.05


def delta_doubling_failures(delta_list: Sequence[float], floors: Sequence[float],
                            slack: float = DELTA_DOUBLING_SLACK) -> List[str]:
    failures = []
    for (d0, f0), (d1, f1) in zip(zip(delta_list, floors), zip(delta_list[1:], floors[1:])):
        if f1 < (1.0 - slack) * f0:
            failures.append(f"δ {d0:g} → {d1:g}: минимум ошибки {f0:.4e} → {f1:.4e}")
    return failures


def check_delta_doubling(delta_list: Sequence[float] = (1e-4, 2e-4, 4e-4)) -> tuple[bool, str]:
    study = run_perturbation_study(Variant.UNSTABLE, "U1", RATE_LEVELS, delta_list)
    floors = [min(row[j] for row in study.errors) for j in range(len(delta_list))]
    return _first_failure(delta_doubling_failures(delta_list, floors),
                          "минимумы " + ", ".join(f"{f:.4e}" for f in floors))


QUICK_CHECKS: Sequence[Check] = (
    Check("form_symmetry", QUICK, check_symmetry),
    Check("g_block_transpose", QUICK, check_g_transpose),
    Check("coercivity_identity", QUICK, check_coercivity_identity),
    Check("integration_by_parts", QUICK, check_integration_by_parts),
    Check("constraint_form", QUICK, check_constraint_form),
    Check("zero_data", QUICK, check_zero_data),
    Check("heat_residuals", QUICK, check_heat_residuals),
    Check("lagrangian_critical_point", QUICK, check_lagrangian_critical_point),
    Check("system_dimension", QUICK, check_dimensions),
)

FULL_CHECKS: Sequence[Check] = (
    Check("interpolation_rates", FULL, check_interpolation_rates),
    Check("jump_scaling", FULL, check_jump_rate),
    Check("discrete_poincare", FULL, check_discrete_poincare),
    Check("seminorm_upper", FULL, check_seminorm_upper),
    Check("dual_norm_upper", FULL, check_dual_upper),
    Check("constraint_lower", FULL, check_constraint_lower),
    Check("ritz_orthogonality", FULL, check_ritz_orthogonality),
    Check("alpha_certificate", FULL, check_alpha_certificate),
    Check("direct_vs_iterative", FULL, check_direct_vs_iterative),
    Check("stable_convergence", FULL, check_stable_convergence),
    Check("unstable_convergence", FULL, check_unstable_convergence),
    Check("noise_stagnation", FULL, check_noise_stagnation),
    Check("delta_doubling", FULL, check_delta_doubling),
)


def checks_for(level: str) -> List[Check]:
    if level == QUICK:
        return list(QUICK_CHECKS)
    if level == FULL:
        return list(QUICK_CHECKS) + list(FULL_CHECKS)
    raise ValueError(f"уровень проверки: quick или full, получено {level!r}")


def run_checks(level: str = QUICK) -> List[CheckResult]:
    results = []
    for check in checks_for(level):
        res = check.run()
        logging.info("[VERIFY] %s %s (%.2fs): %s", res.name, "PASS" if res.passed else "FAIL",
                     res.seconds, res.detail)
        results.append(res)
    return results


def format_table(results: Sequence[CheckResult]) -> str:
    width = max((len(r.name) for r in results), default=4)
    lines = [f"{'check'.ljust(width)}  status  detail"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}    {r.detail}")
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} passed")
    return "\n".join(lines)
