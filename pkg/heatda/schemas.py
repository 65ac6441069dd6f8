# heatda/schemas.py
from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from .assembly import PerturbationTarget
from .forms import NormKind, Variant
from .mesh import Region
from .solutions import get_solution

# ========== Конфигурация прогона ==========

# значения по умолчанию для каждого варианта (геометрия согласована с n, кратными 8)
VARIANT_DEFAULTS: Dict[Variant, dict] = {
    Variant.UNSTABLE: {
        "solution": "U1", "T": 1.0, "T1": 0.25, "T2": 0.75,
        "omega": (0.375, 0.625, 0.375, 0.625), "B": (0.25, 0.75, 0.25, 0.75),
        "norms": [NormKind.L2H1],
    },
    Variant.STABLE: {
        "solution": "S1", "T": 0.5, "T1": 0.25, "T2": None,
        "omega": (0.25, 0.75, 0.25, 0.75), "B": (0.0, 1.0, 0.0, 1.0),
        "norms": [NormKind.CINT_L2, NormKind.L2H1, NormKind.H1HM1],
    },
}
VARIANT_DEFAULTS[Variant.UNSTABLE_JUMP_DUAL] = VARIANT_DEFAULTS[Variant.UNSTABLE]


class Box(BaseModel):
    x0: float
    x1: float
    y0: float
    y1: float

    @model_validator(mode="after")
    def _inside_unit_square(self) -> "Box":
        for v in (self.x0, self.x1, self.y0, self.y1):
            if not 0.0 <= v <= 1.0:
                raise ValueError("углы прямоугольника должны лежать в [0,1]")
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("ожидается x0 <= x1 и y0 <= y1")
        return self

    @staticmethod
    def coerce(raw):
        """Строка "x0,x1,y0,y1" или четвёрка чисел -> dict; Box и dict пропускаем как есть."""
        if isinstance(raw, (Box, dict)):
            return raw
        if isinstance(raw, str):
            raw = [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        if len(raw) != 4:
            raise ValueError("ожидается четыре числа x0,x1,y0,y1")
        return dict(zip(("x0", "x1", "y0", "y1"), raw))

    def region(self) -> Region:
        return Region(self.x0, self.x1, self.y0, self.y1)

    def text(self) -> str:
        return f"{self.x0:g},{self.x1:g},{self.y0:g},{self.y1:g}"


def _field_error(name: str, message: str) -> ValueError:
    # имя поля в начале сообщения: по нему CLI находит строку в INI
    return ValueError(f"{name}: {message}")


class RunConfig(BaseModel):
    variant: Variant
    solution: str
    n_list: List[int]
    c_t: float = Field(default=1.0, gt=0)
    T: float = Field(gt=0)
    T1: float = Field(gt=0)
    T2: Optional[float] = None
    omega: Box
    B: Box
    delta_list: List[float] = Field(default_factory=lambda: [0.0])
    target: PerturbationTarget = PerturbationTarget.BOTH
    seed: int = 0
    output_dir: str = "./out"
    norms: List[NormKind]
    svg: bool = False
    method: str = "auto"
    boundary_compatible_only: bool = False

    @model_validator(mode="before")
    @classmethod
    def _materialize_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        try:
            variant = Variant(data.get("variant", Variant.UNSTABLE))
        except ValueError:
            return data  # сообщение о неизвестном варианте даст валидатор поля
        defaults = VARIANT_DEFAULTS[variant]
        for key in ("solution", "T", "T1", "T2", "norms"):
            data.setdefault(key, defaults[key])
        for key in ("omega", "B"):
            try:
                data[key] = Box.coerce(data.get(key, defaults[key]))
            except (TypeError, ValueError) as e:
                raise _field_error(key, str(e)) from None
        data.setdefault("boundary_compatible_only", variant == Variant.STABLE)
        return data

    @field_validator("n_list")
    @classmethod
    def _n_list(cls, v: List[int]) -> List[int]:
        if len(v) < 4:
            raise _field_error("n_list", "нужно не меньше 4 уровней сетки")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise _field_error("n_list", "уровни должны строго возрастать")
        if v[0] < 2:
            raise _field_error("n_list", "n >= 2")
        return v

    @field_validator("delta_list")
    @classmethod
    def _deltas(cls, v: List[float]) -> List[float]:
        if not v or any(d < 0 for d in v):
            raise _field_error("delta_list", "амплитуды должны быть >= 0")
        return v

    @field_validator("method")
    @classmethod
    def _method(cls, v: str) -> str:
        if v not in ("auto", "direct", "iterative"):
            raise _field_error("method", "auto, direct или iterative")
        return v

    @model_validator(mode="after")
    def _invariants(self) -> "RunConfig":
        try:
            sol = get_solution(self.solution)
        except ValueError as e:
            raise _field_error("solution", str(e)) from None
        needs_compat = self.variant == Variant.STABLE or self.boundary_compatible_only
        if needs_compat and not sol.boundary_compatible:
            raise _field_error(
                "solution", f"{sol.id} не обращается в ноль на ∂Ω, а вариант {self.variant.value} "
                            f"(boundary_compatible_only={self.boundary_compatible_only}) этого требует",
            )
        if self.variant.is_unstable and self.T2 is None:
            raise _field_error("T2", "для неустойчивого варианта нужно окно (T1, T2)")
        t_end = self.T if self.T2 is None else self.T2
        if not (0 < self.T1 < t_end <= self.T):
            raise _field_error("T1", f"ожидается 0 < T1 < T2 <= T, получено T1={self.T1}, T2={t_end}, T={self.T}")
        for n in self.n_list:
            tau = self.c_t / n
            for name, t in (("T", self.T), ("T1", self.T1), ("T2", self.T2)):
                if t is None:
                    continue
                k = t / tau
                if abs(k - round(k)) > 1e-9 * max(1.0, k):
                    raise _field_error(name, f"{name}={t:g} не лежит на сетке по времени τ={tau:g} (n={n})")
            for name in ("omega", "B"):
                box: Box = getattr(self, name)
                if not box.region().is_resolved(n):
                    raise _field_error(name, f"прямоугольник {box.text()} не согласован с сеткой n={n}")
        om, b = self.omega, self.B
        if self.variant.is_unstable and not (b.x0 <= om.x0 and om.x1 <= b.x1 and b.y0 <= om.y0 and om.y1 <= b.y1):
            raise _field_error("omega", "требуется ω ⊂ B")
        return self

    @property
    def window_end(self) -> float:
        return self.T if self.T2 is None else self.T2

    def resolved_items(self) -> List[Tuple[str, str]]:
        """Все параметры с подставленными умолчаниями, для заголовка отчёта."""
        items = []
        for key, value in self.model_dump(mode="json").items():
            if key in ("omega", "B"):
                value = getattr(self, key).text()
            elif isinstance(value, list):
                value = ",".join(str(v) for v in value)
            items.append((key, str(value)))
        return items


# ========== Отчёты ==========

class ErrorEntry(BaseModel):
    norm_kind: NormKind
    window: str
    value: float


class LevelResult(BaseModel):
    n: int
    h: float
    tau: float
    errors: List[ErrorEntry] = Field(default_factory=list)
    # ⫼(u_h − π_h u, z_h)⫼ и его слагаемые, ‖u_h − u‖_ω
    diagnostics: Dict[str, float] = Field(default_factory=dict)
    residual: float = 0.0
    iterations: Optional[int] = None
    q_noise_norm: float = 0.0
    f_noise_norm: float = 0.0

    def error(self, kind: NormKind, window: Optional[str] = None) -> float:
        for e in self.errors:
            if e.norm_kind == kind and (window is None or e.window == window):
                return e.value
        raise KeyError(f"{kind.value} {window or ''}")


class RateFit(BaseModel):
    label: str
    rate: float
    residual: float


class ConvergenceReport(BaseModel):
    variant: Variant
    solution: str
    delta: float
    levels: List[LevelResult] = Field(default_factory=list)
    rates: Dict[str, RateFit] = Field(default_factory=dict)
    diagnostic_rates: Dict[str, RateFit] = Field(default_factory=dict)
    partial: bool = False
    failure: Optional[str] = None

    def series(self, kind: NormKind, window: Optional[str] = None) -> List[Tuple[float, float]]:
        return [(lv.h, lv.error(kind, window)) for lv in self.levels]


class PerturbationStudy(BaseModel):
    variant: Variant
    solution: str
    norm_kind: NormKind
    window: str
    n_list: List[int]
    h_list: List[Optional[float]]
    tau_list: List[Optional[float]]
    delta_list: List[float]
    errors: List[List[Optional[float]]]  # [уровень][δ], None — уровень не посчитан
    h_star: List[Optional[float]]  # None при δ = 0 и для неполного столбца
    partial: bool = False
    failure: Optional[str] = None


__all__ = [
    "Box", "RunConfig", "VARIANT_DEFAULTS",
    "ErrorEntry", "LevelResult", "RateFit", "ConvergenceReport", "PerturbationStudy",
]
