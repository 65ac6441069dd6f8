# heatda/main.py
"""
Командная строка:

    python -m heatda converge <config.ini>
    python -m heatda perturb <config.ini>
    python -m heatda verify [--level quick|full]
    python -m heatda mesh-dump <n> <path>

Коды выхода: 0 — успех, 1 — проверка не прошла, 2 — ошибка конфигурации, 3 — отказ решателя.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from . import config
from .analysis import SweepAborted, SweepSettings, config_windows, run_convergence, run_perturbation_study
from .checks import format_table, run_checks
from .mesh import build_structured_mesh, dump_mesh
from .report import write_convergence, write_perturbation
from .schemas import RunConfig
from .solver import SolverError
from .utils import parse_floats, parse_ints

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# допустимые ключи по секциям INI
SECTIONS: Dict[str, Tuple[str, ...]] = {
    "run": ("variant", "solution", "n_list", "c_t", "seed", "output_dir", "norms", "svg", "method",
            "boundary_compatible_only"),
    "time": ("T", "T1", "T2"),
    "geometry": ("omega", "B"),
    "perturbation": ("delta_list", "target"),
}
_KEY_SECTION = {k: s for s, keys in SECTIONS.items() for k in keys}
_KEY_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]")


class ConfigError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        where = []
        if self.field:
            where.append(f"поле {self.field}")
        if self.line:
            where.append(f"строка {self.line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        return prefix + super().__str__()


# ========== Конфигурация ==========

def _key_lines(text: str) -> Dict[str, int]:
    lines = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        m = _KEY_LINE.match(raw)
        if m:
            lines.setdefault(m.group(1), i)
    return lines


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key == "n_list":
        return parse_ints(raw)
    if key == "delta_list":
        return parse_floats(raw)
    if key == "norms":
        return [v.strip() for v in raw.split(",") if v.strip()]
    if key == "T2" and raw.lower() in ("", "none"):
        return None
    return raw


def load_run_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"не удалось прочитать {p}: {e}") from e

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # T, T1, B — с учётом регистра
    try:
        parser.read_string(text, source=str(p))
    except configparser.Error as e:
        raise ConfigError(f"синтаксис INI: {e}", line=getattr(e, "lineno", None)) from None

    lines = _key_lines(text)
    data: Dict[str, object] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"неизвестная секция [{section}]")
        for key, raw in parser.items(section):
            if _KEY_SECTION.get(key) != section:
                raise ConfigError(f"неизвестный ключ {key!r} в секции [{section}]", key, lines.get(key))
            try:
                data[key] = _convert(key, raw)
            except ValueError as e:
                raise ConfigError(str(e), key, lines.get(key)) from None

    data.setdefault("output_dir", config.OUTPUT_DIR)
    data.setdefault("method", config.SOLVER_METHOD)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        field, message = _first_error(e)
        raise ConfigError(message, field, lines.get(field) if field else None) from None


def _first_error(e: ValidationError) -> Tuple[Optional[str], str]:
    err = e.errors()[0]
    msg = str(err.get("msg", ""))
    msg = msg.removeprefix("Value error, ")
    # валидаторы RunConfig начинают сообщение с имени поля
    m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*): (.*)$", msg, flags=re.S)
    if m and m.group(1) in _KEY_SECTION:
        return m.group(1), m.group(2)
    loc = [str(x) for x in err.get("loc", ()) if isinstance(x, str)]
    return (loc[0] if loc else None), msg


# ========== Команды ==========

def cmd_converge(config_path: str, svg: Optional[bool] = None) -> int:
    cfg = load_run_config(config_path)
    settings = SweepSettings.from_config(cfg)
    windows = config_windows(cfg)
    svg = cfg.svg if svg is None else svg
    items = cfg.resolved_items()
    try:
        report = run_convergence(cfg.variant, cfg.solution, cfg.n_list, windows, cfg.delta_list[0], settings,
                                 check=False)
    except SweepAborted as e:
        write_convergence(e.report, cfg.output_dir, items, svg=False)
        logging.error("[SWEEP] %s", e)
        return EXIT_SOLVER
    write_convergence(report, cfg.output_dir, items, svg=svg)
    return EXIT_OK


def cmd_perturb(config_path: str, svg: Optional[bool] = None) -> int:
    cfg = load_run_config(config_path)
    settings = SweepSettings.from_config(cfg)
    window = config_windows(cfg)[0]
    svg = cfg.svg if svg is None else svg
    items = cfg.resolved_items()
    try:
        study = run_perturbation_study(cfg.variant, cfg.solution, cfg.n_list, cfg.delta_list, window, settings)
    except SweepAborted as e:
        write_perturbation(e.report, cfg.output_dir, items, svg=False)
        logging.error("[SWEEP] %s", e)
        return EXIT_SOLVER
    write_perturbation(study, cfg.output_dir, items, svg=svg)
    return EXIT_OK


def cmd_verify(level: str = "quick") -> int:
    results = run_checks(level)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        logging.error("[VERIFY] invariant %s failed: %s", r.name, r.detail)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def cmd_mesh_dump(n: int, path: str) -> int:
    mesh = build_structured_mesh(n)
    dump_mesh(mesh, path)
    logging.info("[MESH] n=%d dumped to %s", n, path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatda", description="Стабилизированное усвоение данных для уравнения теплопроводности")
    parser.add_argument("--log-level", default=None, help="уровень логирования (по умолчанию HEATDA_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="прогон по последовательности сеток")
    p.add_argument("config")
    p.add_argument("--svg", action="store_true", default=None, help="построить SVG-графики")

    p = sub.add_parser("perturb", help="матрица ошибок n × δ")
    p.add_argument("config")
    p.add_argument("--svg", action="store_true", default=None)

    p = sub.add_parser("verify", help="проверка инвариантов")
    p.add_argument("--level", choices=("quick", "full"), default="quick")

    p = sub.add_parser("mesh-dump", help="текстовый дамп структурированной сетки")
    p.add_argument("n", type=int)
    p.add_argument("path")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config.setup_logging(args.log_level)
    try:
        if args.command == "converge":
            return cmd_converge(args.config, args.svg)
        if args.command == "perturb":
            return cmd_perturb(args.config, args.svg)
        if args.command == "verify":
            return cmd_verify(args.level)
        return cmd_mesh_dump(args.n, args.path)
    except ConfigError as e:
        logging.error("[CONFIG] %s", e)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        logging.error("[SOLVER] %s (%s)", e, e.reason)
        return EXIT_SOLVER
    except ValueError as e:
        # n < 2 в mesh-dump и подобное
        logging.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
