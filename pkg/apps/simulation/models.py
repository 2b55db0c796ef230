# apps/simulation/models.py
from django.db import models
from django.utils import timezone


class SimulationRun(models.Model):
    """
    Registro de cada ejecución de ``solve`` o ``simulate``. Guarda parámetros,
    estado, totales y carpeta de salida. Los CSV nunca dependen de esta tabla.
    """
    STATUS_CHOICES = [
        ("pending", "Pendiente"),
        ("running", "En ejecución"),
        ("completed", "Completado"),
        ("failed", "Fallido"),
    ]

    command = models.CharField(max_length=20)
    solver = models.CharField(max_length=20)
    seed = models.BigIntegerField()
    scenario_name = models.CharField(max_length=200, blank=True)
    parameters = models.JSONField(default=dict, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default="pending")
    total_cost = models.FloatField(null=True, blank=True)
    total_dissatisfaction = models.FloatField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(null=True, blank=True)
    created_at = models.DateTimeField(default=timezone.now, editable=False)
    started_at = models.DateTimeField(null=True, blank=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = "Corrida de simulación"
        verbose_name_plural = "Corridas de simulación"
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.command}:{self.solver} seed={self.seed} | {self.created_at:%Y-%m-%d %H:%M}"

    @property
    def duration(self):
        if self.started_at and self.finished_at:
            return (self.finished_at - self.started_at).total_seconds()
        return None
