import numpy as np
import pytest

import heatda.analysis as analysis
from heatda.analysis import (
    SweepAborted, SweepSettings, default_windows, exact_norms, fit_rate, run_convergence, run_perturbation_study,
    stagnation_h,
)
from heatda.checks import delta_doubling_failures
from heatda.forms import NormKind, NormWindow, Variant
from heatda.mesh import Region, build_structured_mesh
from heatda.solutions import get_solution
from heatda.solver import SolverError
from heatda.spaces import TimeGrid

SMALL = [4, 8, 12, 16]


def test_fit_rate_exact():
    hs = [1 / 8, 1 / 16, 1 / 32]
    rate, res = fit_rate([(h, h) for h in hs])
    assert rate == pytest.approx(1.0, abs=1e-12) and res == pytest.approx(0.0, abs=1e-12)
    assert fit_rate([(h, h**2) for h in hs])[0] == pytest.approx(2.0, abs=1e-12)


def test_fit_rate_noisy(rng):
    hs = [2.0**-k for k in range(3, 8)]
    pts = [(h, 3.0 * h**0.6 * (1 + 0.01 * rng.standard_normal())) for h in hs]
    assert fit_rate(pts)[0] == pytest.approx(0.6, abs=0.05)


def test_fit_rate_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.05, 0.5)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.05, 0.0), (0.025, 0.1)])


def test_default_windows():
    w = default_windows(Variant.STABLE)
    assert [x.kind for x in w] == [NormKind.CINT_L2, NormKind.L2H1, NormKind.H1HM1]
    assert (w[0].t_a, w[0].t_b) == (0.25, 0.5)
    u = default_windows(Variant.UNSTABLE)
    assert len(u) == 1 and u[0].region == Region(0.25, 0.75, 0.25, 0.75)


def test_exact_norms_of_stationary_sine():
    sol = get_solution("S2")
    mesh, grid = build_structured_mesh(16), TimeGrid(1.0, 8)
    norms = exact_norms(sol, mesh, grid)
    assert norms.h11 > 0 and norms.h02 > norms.h11 * 0.5
    assert norms.star == pytest.approx(norms.h11 + norms.h02)
    assert exact_norms(get_solution("Z0"), mesh, grid).star == 0.0


def _stable_settings():
    return SweepSettings(T=0.5, omega=Region(0.25, 0.75, 0.25, 0.75))


def test_sweep_structure_and_order():
    report = run_convergence(Variant.STABLE, "S1", SMALL, settings=_stable_settings(), max_workers=2)
    assert [lv.n for lv in report.levels] == SMALL
    assert all(len(lv.errors) == 3 for lv in report.levels)
    assert len(report.rates) == 3
    assert {"tnorm", "V_seminorm", "omega_seminorm", "z_W", "omega_error"} <= set(report.diagnostic_rates)
    assert not report.partial
    l2h1 = [lv.error(NormKind.L2H1) for lv in report.levels]
    assert l2h1[-1] < l2h1[0]


def test_tiny_delta_matches_clean_run():
    clean = run_convergence(Variant.STABLE, "S1", SMALL, settings=_stable_settings())
    noisy = run_convergence(Variant.STABLE, "S1", SMALL, delta=1e-12, settings=_stable_settings())
    for a, b in zip(clean.levels, noisy.levels):
        for ea, eb in zip(a.errors, b.errors):
            assert abs(ea.value - eb.value) <= 1e-9
        assert b.q_noise_norm > 0 and a.q_noise_norm == 0


def test_sweep_validation():
    with pytest.raises(ValueError):
        run_convergence(Variant.STABLE, "S1", [4, 8, 16], settings=_stable_settings())
    with pytest.raises(ValueError):
        run_convergence(Variant.STABLE, "S1", [4, 8, 8, 16], settings=_stable_settings())
    with pytest.raises(ValueError):
        run_convergence(Variant.STABLE, "U1", SMALL, settings=_stable_settings())


def test_solver_failure_keeps_partial_report(monkeypatch):
    real = analysis.solve

    def flaky(system, method=None):
        if system.pair.mesh.n == 16:
            raise SolverError("singular", "факторизация не удалась")
        return real(system, method)

    monkeypatch.setattr(analysis, "solve", flaky)
    with pytest.raises(SweepAborted) as exc:
        run_convergence(Variant.STABLE, "S1", SMALL, settings=_stable_settings(), max_workers=1)
    report = exc.value.report
    assert report.partial and "n=16" in report.failure
    assert [lv.n for lv in report.levels] == [4, 8, 12]
    assert len(report.rates) == 3


def test_perturbation_study_matrix():
    study = run_perturbation_study(Variant.STABLE, "S1", SMALL, [0.0, 1e-2], settings=_stable_settings())
    assert len(study.errors) == len(SMALL) and all(len(row) == 2 for row in study.errors)
    assert study.h_star[0] is None and study.h_star[1] in study.h_list
    clean = run_convergence(Variant.STABLE, "S1", SMALL, default_windows(Variant.STABLE)[:1], settings=_stable_settings())
    assert [row[0] for row in study.errors] == [lv.errors[0].value for lv in clean.levels]


def test_stagnation_h():
    assert stagnation_h([0.4, 0.2, 0.1, 0.05], [1.0, 0.5, 0.4, 0.6]) == 0.1


def test_settings_defaults():
    s = SweepSettings.defaults(Variant.UNSTABLE)
    assert s.T == 1.0 and s.omega == Region(0.375, 0.625, 0.375, 0.625)
    assert np.isclose(SweepSettings.defaults(Variant.STABLE, c_t=0.5).c_t, 0.5)


def test_perturbation_failure_keeps_computed_cells(monkeypatch):
    real = analysis.solve

    def flaky(system, method=None):
        if system.perturbation is not None and system.pair.mesh.n == 12:
            raise SolverError("singular", "факторизация не удалась")
        return real(system, method)

    monkeypatch.setattr(analysis, "solve", flaky)
    with pytest.raises(SweepAborted) as exc:
        run_perturbation_study(Variant.STABLE, "S1", SMALL, [0.0, 1e-2, 2e-2], settings=_stable_settings(),
                               max_workers=1)
    study = exc.value.report
    assert study.partial and study.failure.startswith("δ=0.01, n=12")
    assert all(row[0] is not None for row in study.errors)
    assert [row[1] is not None for row in study.errors] == [True, True, False, False]
    assert all(row[2] is None for row in study.errors)
    assert study.h_star == [None, None, None]
    assert None not in study.h_list


def test_doubling_delta_keeps_error_floor():
    box = Region(0.25, 0.75, 0.25, 0.75)
    settings = SweepSettings(T=0.5, omega=box)
    window = NormWindow(0.25, 0.5, box, NormKind.L2H1)
    deltas = [1e-4, 2e-4, 4e-4]
    study = run_perturbation_study(Variant.UNSTABLE, "U1", SMALL, deltas, window, settings)
    floors = [min(row[j] for row in study.errors) for j in range(len(deltas))]
    assert delta_doubling_failures(deltas, floors) == []
