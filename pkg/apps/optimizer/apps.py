from django.apps import AppConfig


class OptimizerConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.optimizer"
    verbose_name = "Optimización multiobjetivo"

    def ready(self):
        # registra los solvers en SolverService
        from . import services  # noqa: F401
