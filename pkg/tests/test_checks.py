import pytest

from heatda.checks import (
    DIAGNOSTIC_RATES, check_constraint_lower, check_delta_doubling, check_direct_vs_iterative,
    check_discrete_poincare, check_dual_upper, check_interpolation_rates, check_jump_rate,
    check_noise_stagnation, check_ritz_orthogonality, check_seminorm_upper, check_stable_convergence,
    check_unstable_convergence, delta_doubling_failures, diagnostic_rate_failures, stagnation_verdict,
)
from heatda.forms import Variant
from heatda.schemas import ConvergenceReport, RateFit


# ========== Вердикты на синтетических данных ==========

@pytest.mark.parametrize("errors, expected", [
    ([0.30, 0.20, 0.15, 0.16], (True, True)),   # минимум внутри, дальше рост
    ([0.30, 0.20, 0.22, 0.21], (True, True)),   # последний шаг выигрывает < 10%
    ([0.30, 0.20, 0.28, 0.22], (True, False)),  # последний шаг снова заметно улучшает
    ([0.30, 0.20, 0.15, 0.10], (False, False)),  # ещё сходится
    ([0.10, 0.20, 0.25, 0.30], (False, True)),   # минимум на самой грубой сетке
])
def test_stagnation_verdict(errors, expected):
    assert stagnation_verdict(errors) == expected


def test_delta_doubling_failures():
    deltas = [1e-4, 2e-4, 4e-4]
    assert delta_doubling_failures(deltas, [0.100, 0.101, 0.120]) == []
    assert delta_doubling_failures(deltas, [0.100, 0.097, 0.100]) == []
    failures = delta_doubling_failures(deltas, [0.100, 0.080, 0.090])
    assert len(failures) == 1 and "0.0001 → 0.0002" in failures[0]


def _report_with_rates(**rates):
    report = ConvergenceReport(variant=Variant.UNSTABLE, solution="U1", delta=0.0)
    for name, rate in rates.items():
        report.diagnostic_rates[name] = RateFit(label=name, rate=rate, residual=0.0)
    return report


def test_diagnostic_rates_all_asserted():
    assert diagnostic_rate_failures(_report_with_rates(tnorm=1.0, z_W=0.95, omega_error=1.2)) == []
    failures = diagnostic_rate_failures(_report_with_rates(tnorm=1.0, z_W=0.385, omega_error=0.736))
    assert [f.split()[0] for f in failures] == ["z_W", "omega_error"]
    missing = diagnostic_rate_failures(_report_with_rates(tnorm=1.0))
    assert len(missing) == len(DIAGNOSTIC_RATES) - 1


# ========== Полный набор (n до 64) ==========

@pytest.mark.slow
@pytest.mark.parametrize("check", [
    check_interpolation_rates,
    check_jump_rate,
    check_discrete_poincare,
    check_seminorm_upper,
    check_dual_upper,
    check_constraint_lower,
    check_ritz_orthogonality,
    check_direct_vs_iterative,
], ids=lambda fn: fn.__name__.removeprefix("check_"))
def test_full_invariants(check):
    ok, detail = check()
    assert ok, detail


@pytest.mark.slow
def test_stable_rates_at_acceptance_scale():
    ok, detail = check_stable_convergence()
    assert ok, detail


@pytest.mark.slow
def test_unstable_rates_at_acceptance_scale():
    ok, detail = check_unstable_convergence()
    assert ok, detail


@pytest.mark.slow
def test_noise_stagnation_at_acceptance_scale():
    ok, detail = check_noise_stagnation()
    assert ok, detail


@pytest.mark.slow
def test_delta_doubling_at_acceptance_scale():
    ok, detail = check_delta_doubling()
    assert ok, detail
