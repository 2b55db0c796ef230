# apps/simulation/forecast.py
"""
Pronósticos = valor real corrompido con ruido uniforme cuya cota crece
con la anticipación: ε(m) = ε₀ + pendiente·m, y e_0 = 0 (el slot actual
se observa sin error).
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from django.core.exceptions import ValidationError

from apps.common.exceptions import ParameterError
from apps.optimizer.objectives import ForecastBundle

SERIES = ("price", "renewable", "load")


@dataclass(frozen=True)
class ErrorBound:
    base_fraction: float = 0.0
    growth_per_step: float = 0.0

    def __post_init__(self):
        if self.base_fraction < 0 or self.growth_per_step < 0:
            raise ParameterError("Las cotas de error deben ser ≥ 0")

    def envelope(self, horizon: int) -> np.ndarray:
        envelope = self.base_fraction + self.growth_per_step * np.arange(horizon)
        envelope[:1] = 0.0
        return envelope

    @property
    def is_zero(self) -> bool:
        return self.base_fraction == 0 and self.growth_per_step == 0


@dataclass(frozen=True)
class ErrorProfile:
    price: ErrorBound = ErrorBound()
    renewable: ErrorBound = ErrorBound()
    load: ErrorBound = ErrorBound()
    name: str = "perfect"

    @classmethod
    def zero(cls) -> "ErrorProfile":
        return cls(name="perfect")

    @classmethod
    def default(cls) -> "ErrorProfile":
        return cls(
            price=ErrorBound(0.01, 0.005),
            renewable=ErrorBound(0.02, 0.01),
            load=ErrorBound(0.01, 0.0075),
            name="errors",
        )

    @classmethod
    def from_file(cls, path) -> "ErrorProfile":
        """YAML: ``{price: {base_fraction, growth_per_step}, renewable: {...}, load: {...}}``."""
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"error_profile: no existe el archivo {path}")
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ValidationError(f"error_profile: {path} debe ser un mapeo clave-valor")
        errors, bounds = [], {}
        for key in SERIES:
            entry = data.get(key) or {}
            try:
                bounds[key] = ErrorBound(
                    float(entry.get("base_fraction", 0.0)), float(entry.get("growth_per_step", 0.0))
                )
            except (TypeError, ValueError, AttributeError) as exc:
                errors.append(f"error_profile.{key}: {exc}")
        if errors:
            raise ValidationError(errors)
        name = str(data.get("name", "errors"))
        if name == "perfect":
            raise ValidationError("error_profile.name: 'perfect' está reservado para el perfil sin errores")
        return cls(name=name, **bounds)

    @property
    def is_zero(self) -> bool:
        return all(getattr(self, key).is_zero for key in SERIES)


def make_forecast(scenario, t_now: int, horizon: int, profile: ErrorProfile, rng) -> ForecastBundle:
    """Pronóstico para los slots t_now..t_now+horizon−1 (horizonte ya recortado)."""
    scenario.grid.check(t_now)
    scenario.grid.check(t_now + horizon - 1)
    window = slice(t_now - 1, t_now - 1 + horizon)
    truth = {
        "price": scenario.price_series()[window],
        "renewable": scenario.renewable_series()[window],
        "load": scenario.load_series()[window],
    }
    noisy = {}
    for key in SERIES:
        bound = getattr(profile, key)
        if bound.is_zero:
            noisy[key] = truth[key].copy()
            continue
        envelope = bound.envelope(horizon)
        noisy[key] = truth[key] * (1.0 + rng.uniform(-envelope, envelope))
    return ForecastBundle(
        price=np.maximum(noisy["price"], 0.0),
        renewable=np.maximum(noisy["renewable"], 0.0),
        inflexible_load=np.maximum(noisy["load"], 0.0),
        t_now=t_now,
    )
