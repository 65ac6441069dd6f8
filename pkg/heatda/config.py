# heatda/config.py
import os
import logging

from dotenv import load_dotenv

# .env рядом с рабочей директорией (как у бота); переменные окружения важнее
load_dotenv(override=False)


def _env_bool(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


def _env_int(name: str, default: int) -> int:
    raw = (os.getenv(name) or "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{name} должен быть целым числом, получено {raw!r}")


LOG_LEVEL = os.getenv("HEATDA_LOG_LEVEL", "INFO").strip().upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# потолок потоков для параллельных прогонов по уровням сетки
MAX_WORKERS = max(1, _env_int("HEATDA_MAX_WORKERS", min(4, os.cpu_count() or 1)))
OUTPUT_DIR = os.getenv("HEATDA_OUTPUT_DIR", "./out").strip()
SOLVER_METHOD = os.getenv("HEATDA_SOLVER", "auto").strip().lower()
if SOLVER_METHOD not in ("auto", "direct", "iterative"):
    raise SystemExit("HEATDA_SOLVER должен быть auto, direct или iterative")
# auto: выше этого числа неизвестных LU заменяется на MINRES
DIRECT_MAX_DIM = max(1, _env_int("HEATDA_DIRECT_MAX_DIM", 300_000))

# сохранять ли промежуточные матрицы (для сверки во внешних инструментах)
EXPORT_MATRICES = _env_bool("HEATDA_EXPORT_MATRICES", "false")


def setup_logging(level: str | None = None) -> None:
    logging.basicConfig(level=(level or LOG_LEVEL), format=LOG_FORMAT)
