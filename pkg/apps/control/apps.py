from django.apps import AppConfig


class ControlConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.control"
    verbose_name = "Parametrización de Laguerre y restricciones"
