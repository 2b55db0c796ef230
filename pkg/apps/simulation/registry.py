# apps/simulation/registry.py
"""Registro opcional de corridas en la base de datos (SimulationRun)."""
import logging
from contextlib import contextmanager
from typing import Dict, Optional

from django.db import DatabaseError, connection
from django.utils import timezone

logger = logging.getLogger(__name__)


def registry_available() -> bool:
    from .models import SimulationRun

    try:
        return SimulationRun._meta.db_table in connection.introspection.table_names()
    except DatabaseError:
        return False


@contextmanager
def record_run(command: str, solver: str, seed: int, scenario_name: str, parameters: Dict, output_dir: str):
    """
    Crea el registro en estado ``running`` y lo cierra como ``completed`` o
    ``failed``. El dict devuelto acepta ``total_cost`` y ``total_dissatisfaction``.
    Si la tabla no existe, no registra nada y solo avisa.
    """
    from .models import SimulationRun

    outcome: Dict[str, Optional[float]] = {}
    run = None
    if registry_available():
        run = SimulationRun.objects.create(
            command=command, solver=solver, seed=seed, scenario_name=scenario_name,
            parameters=parameters, output_dir=str(output_dir), status="running", started_at=timezone.now(),
        )
    else:
        logger.warning("La tabla de corridas no existe (¿falta migrate?); no se registra la corrida.")

    try:
        yield outcome
    except Exception as exc:
        if run is not None:
            run.status = "failed"
            run.error_message = str(exc)
            run.finished_at = timezone.now()
            run.save(update_fields=["status", "error_message", "finished_at"])
        raise
    if run is not None:
        run.status = "completed"
        run.total_cost = outcome.get("total_cost")
        run.total_dissatisfaction = outcome.get("total_dissatisfaction")
        run.finished_at = timezone.now()
        run.save(update_fields=["status", "total_cost", "total_dissatisfaction", "finished_at"])
