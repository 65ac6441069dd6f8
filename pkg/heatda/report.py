# heatda/report.py
"""CSV/SVG отчёты. Все файлы пишутся атомарно; одинаковый вход даёт побайтно одинаковый выход."""
from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .schemas import ConvergenceReport, PerturbationStudy  # noqa: E402
from .utils import atomic_write_text  # noqa: E402

CSV_HEADER = ["variant", "solution", "n", "h", "tau", "delta", "norm_kind", "window", "value"]
DIAGNOSTICS_HEADER = ["variant", "solution", "n", "h", "tau", "delta", "diagnostic", "value"]


def _num(v: Optional[float]) -> str:
    return "" if v is None else format(float(v), ".17g")


def _echo(items: Iterable[Tuple[str, str]]) -> str:
    return "".join(f"# {k} = {v}\n" for k, v in items)


def _render(header: Sequence[str], rows: List[list], items: Iterable[Tuple[str, str]] = ()) -> str:
    buf = io.StringIO()
    buf.write(_echo(items))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ========== Сходимость ==========

def convergence_rows(report: ConvergenceReport, with_residuals: bool = True) -> List[list]:
    v, s, d = report.variant.value, report.solution, _num(report.delta)
    rows = []
    for lv in report.levels:
        for e in lv.errors:
            rows.append([v, s, lv.n, _num(lv.h), _num(lv.tau), d, e.norm_kind.value, e.window, _num(e.value)])
    for key in sorted(report.rates):
        fit = report.rates[key]
        kind, _, window = key.partition("@")
        rows.append([v, s, "rate", "", "", d, kind, window, _num(fit.rate)])
        if with_residuals:
            rows.append([v, s, "rate_residual", "", "", d, kind, window, _num(fit.residual)])
    return rows


def render_convergence_csv(report: ConvergenceReport, items: Iterable[Tuple[str, str]] = ()) -> str:
    items = list(items)
    if report.partial:
        items.append(("partial", f"true ({report.failure})"))
    return _render(CSV_HEADER, convergence_rows(report), items)


def render_diagnostics_csv(report: ConvergenceReport) -> str:
    v, s, d = report.variant.value, report.solution, _num(report.delta)
    rows = []
    for lv in report.levels:
        extra = dict(lv.diagnostics, residual=lv.residual, q_noise=lv.q_noise_norm, f_noise=lv.f_noise_norm)
        for name in sorted(extra):
            rows.append([v, s, lv.n, _num(lv.h), _num(lv.tau), d, name, _num(extra[name])])
    for name in sorted(report.diagnostic_rates):
        rows.append([v, s, "rate", "", "", d, name, _num(report.diagnostic_rates[name].rate)])
    return _render(DIAGNOSTICS_HEADER, rows)


def write_convergence(report: ConvergenceReport, out_dir: str | Path, items: Iterable[Tuple[str, str]] = (),
                      svg: bool = False, stem: Optional[str] = None) -> List[Path]:
    out = Path(out_dir)
    stem = stem or f"converge_{report.variant.value}_{report.solution}"
    written = [out / f"{stem}.csv", out / f"{stem}_diagnostics.csv"]
    atomic_write_text(written[0], render_convergence_csv(report, items))
    atomic_write_text(written[1], render_diagnostics_csv(report))
    if svg and report.levels:
        written.extend(write_convergence_svg(report, out, stem))
    for p in written:
        logging.info("[SWEEP] report written: %s", p)
    return written


# ========== Возмущения ==========

def render_perturbation_csv(study: PerturbationStudy, items: Iterable[Tuple[str, str]] = ()) -> str:
    header = ["n", "h"] + [f"delta={_num(d)}" for d in study.delta_list]
    rows = [[n, _num(h)] + [_num(e) for e in errs] for n, h, errs in zip(study.n_list, study.h_list, study.errors)]
    rows.append(["h_star", ""] + [_num(h) for h in study.h_star])
    items = list(items) + [
        ("variant", study.variant.value), ("solution", study.solution),
        ("norm_kind", study.norm_kind.value), ("window", study.window),
    ]
    if study.partial:
        items.append(("partial", f"true ({study.failure})"))
    return _render(header, rows, items)


def write_perturbation(study: PerturbationStudy, out_dir: str | Path, items: Iterable[Tuple[str, str]] = (),
                       svg: bool = False) -> List[Path]:
    out = Path(out_dir)
    stem = f"perturb_{study.variant.value}_{study.solution}"
    written = [out / f"{stem}.csv"]
    atomic_write_text(written[0], render_perturbation_csv(study, items))
    if svg:
        curves = []
        for j, d in enumerate(study.delta_list):
            pts = [(h, row[j]) for h, row in zip(study.h_list, study.errors) if h is not None and row[j] is not None]
            curves.append((f"δ={d:g}", [p[0] for p in pts], [p[1] for p in pts]))
        path = out / f"{stem}.svg"
        _plot_loglog(path, curves, f"{study.norm_kind.value} {study.window}")
        written.append(path)
    for p in written:
        logging.info("[SWEEP] report written: %s", p)
    return written


# ========== SVG ==========

def _plot_loglog(path: Path, curves, title: str) -> None:
    """Лог-лог график; фиксированные salt и метаданные дают детерминированный SVG."""
    with plt.rc_context({"svg.hashsalt": "heatda", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, xs, ys in curves:
            pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
            if pts:
                ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        ax.set_xlabel("h")
        ax.set_ylabel("error")
        ax.set_title(title)
        ax.grid(True, which="both", linewidth=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    atomic_write_text(path, buf.getvalue())


def write_convergence_svg(report: ConvergenceReport, out_dir: Path, stem: str) -> List[Path]:
    """По одному графику на вид нормы."""
    written = []
    kinds = sorted({e.norm_kind for lv in report.levels for e in lv.errors}, key=lambda k: k.value)
    for kind in kinds:
        windows = sorted({e.window for lv in report.levels for e in lv.errors if e.norm_kind == kind})
        curves = [(w, [lv.h for lv in report.levels], [lv.error(kind, w) for lv in report.levels]) for w in windows]
        path = out_dir / f"{stem}_{kind.value}.svg"
        _plot_loglog(path, curves, f"{report.variant.value} {report.solution} {kind.value}")
        written.append(path)
    return written
