# heatda/utils.py
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path: str | Path, text: str) -> None:
    """Пишем во временный файл рядом и переименовываем: читатель не увидит половину файла."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=str(p.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, p)
    except Exception:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """
    Независимый поток случайных чисел из одного 64-битного seed.
    Philox — счётный генератор; spawn_key разводит потоки (уровни сетки, цели шума).
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def parse_floats(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]


def parse_ints(raw: str) -> list[int]:
    return [int(x) for x in raw.replace(";", ",").split(",") if x.strip()]
