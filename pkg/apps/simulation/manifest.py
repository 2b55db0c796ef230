# apps/simulation/manifest.py
"""Opciones comunes de los comandos y su conversión a un RunManifest validado."""
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from apps.common.exceptions import ConstraintViolationError, HomeFlexError, ParameterError, SlotRangeError
from apps.control.laguerre import LaguerreSettings
from apps.household.loader import load_scenario
from apps.optimizer.moea import MoeaConfig
from apps.optimizer.services import SolverService

from .forecast import ErrorProfile


@dataclass
class RunManifest:
    scenario_path: Path
    series_path: Optional[Path]
    scenario: object
    solvers: List[str]
    seeds: List[int]
    config: MoeaConfig
    laguerre: LaguerreSettings
    error_profile: Optional[ErrorProfile]
    output_dir: Path
    extras: dict = field(default_factory=dict)

    def parameters(self, solver: str, seed: int) -> dict:
        """Parámetros efectivos serializables (para el registro de corridas)."""
        return {
            "scenario": str(self.scenario_path),
            "series": str(self.series_path) if self.series_path else None,
            "solver": solver,
            "seed": seed,
            "population_size": self.config.population_size,
            "max_iterations": self.config.max_iterations,
            "crossover_rate": self.config.crossover_rate,
            "mutation_rate": self.config.mutation_rate,
            "penalty_weight": self.config.penalty_weight,
            "laguerre_pole": self.laguerre.pole,
            "laguerre_order": self.laguerre.order,
            "horizon": self.laguerre.horizon,
            "error_profile": self.error_profile.name if self.error_profile else None,
            **self.extras,
        }


def add_manifest_arguments(parser, default_error_profile: str = "none"):
    parser.add_argument("--scenario", default=str(settings.BUNDLED_SCENARIO),
                        help="Archivo .scenario (YAML). Por defecto, el hogar de referencia incluido.")
    parser.add_argument("--series", default=None, help="CSV slot,price,solar,load (sobrescribe 'series').")
    parser.add_argument("--solver", action="append", choices=["proposed", "penalty", "cdom"],
                        help="Solver a usar; se puede repetir.")
    parser.add_argument("--seed", action="append", type=int, help="Semilla; se puede repetir.")
    parser.add_argument("--pop", type=int, default=None, help="Tamaño de población N_pop.")
    parser.add_argument("--iters", type=int, default=None, help="Iteraciones It_max.")
    parser.add_argument("--horizon", type=int, default=None, help="Horizonte de predicción M.")
    parser.add_argument("--laguerre-order", type=int, default=None, help="Orden J de la red de Laguerre.")
    parser.add_argument("--laguerre-pole", type=float, default=None, help="Polo p de la red de Laguerre.")
    parser.add_argument("--error-profile", default=default_error_profile,
                        help="Ruta a un perfil YAML, 'default' o 'none'.")
    parser.add_argument("--out", default="out", help="Carpeta de salida.")


def _error_profile(value: Optional[str]) -> Optional[ErrorProfile]:
    if value is None or value.lower() == "none":
        return None
    if value.lower() == "default":
        return ErrorProfile.default()
    return ErrorProfile.from_file(value)


def manifest_from_options(options) -> RunManifest:
    """Carga y valida todo; lanza ValidationError con los problemas encontrados."""
    scenario_path = Path(options["scenario"])
    series_path = Path(options["series"]) if options.get("series") else None
    scenario = load_scenario(scenario_path, series_path)

    seeds = options.get("seed") or [int(settings.HOMEFLEX.get("SEED", 2024))]
    solvers = options.get("solver") or ["proposed"]
    unknown = [s for s in solvers if s not in SolverService.registry]
    if unknown:
        raise ValidationError(f"solver: desconocido {', '.join(unknown)}")

    try:
        config = MoeaConfig.from_settings(
            population_size=options.get("pop"), max_iterations=options.get("iters"), seed=seeds[0],
        )
        laguerre = LaguerreSettings.from_settings(
            pole=options.get("laguerre_pole"), order=options.get("laguerre_order"), horizon=options.get("horizon"),
        )
    except ParameterError as exc:
        raise ValidationError(str(exc))
    if not 0.0 <= laguerre.pole < 1.0:
        raise ValidationError(f"laguerre_pole: debe estar en [0, 1) (vale {laguerre.pole})")
    if laguerre.order < 1 or laguerre.horizon < 1:
        raise ValidationError("laguerre_order y horizon deben ser ≥ 1")

    return RunManifest(
        scenario_path=scenario_path,
        series_path=series_path,
        scenario=scenario,
        solvers=list(dict.fromkeys(solvers)),
        seeds=list(dict.fromkeys(int(s) for s in seeds)),
        config=config,
        laguerre=laguerre,
        error_profile=_error_profile(options.get("error_profile")),
        output_dir=Path(options.get("out") or "out"),
    )


def workers() -> int:
    return max(1, int(settings.HOMEFLEX.get("WORKERS", 1)))


# ====================================================
# Códigos de salida
# ====================================================
def validation_message(exc: ValidationError) -> str:
    return "\n".join(f"  - {message}" for message in exc.messages)


@contextmanager
def command_errors():
    """Traduce errores del dominio a CommandError: 2 validación, 3 ejecución."""
    try:
        yield
    except ValidationError as exc:
        raise CommandError(f"❌ Entrada inválida:\n{validation_message(exc)}", returncode=2)
    except (ParameterError, ConstraintViolationError, SlotRangeError) as exc:
        raise CommandError(f"❌ Parámetro inválido: {exc}", returncode=2)
    except HomeFlexError as exc:
        raise CommandError(f"❌ Error de ejecución: {exc}", returncode=3)
