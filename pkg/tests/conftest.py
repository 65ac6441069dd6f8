# tests/conftest.py
import textwrap

import numpy as np
import pytest

from heatda.mesh import build_structured_mesh
from heatda.utils import rng_for


@pytest.fixture
def mesh4():
    return build_structured_mesh(4)


@pytest.fixture
def mesh8():
    return build_structured_mesh(8)


@pytest.fixture
def rng() -> np.random.Generator:
    return rng_for(1234)


@pytest.fixture
def write_ini(tmp_path):
    """Пишет INI-конфиг; output_dir по умолчанию — во временный каталог теста."""
    def _write(body: str, name: str = "run.ini") -> str:
        text = textwrap.dedent(body).strip() + "\n"
        if "output_dir" not in text:
            text = text.replace("[run]\n", f"[run]\noutput_dir = {tmp_path / 'out'}\n", 1)
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
