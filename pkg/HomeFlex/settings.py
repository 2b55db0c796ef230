"""
Django settings for HomeFlex project.

Configuración unificada para:
- Desarrollo local
- Ejecución batch (experimentos en CI / servidor)
Usando variables de entorno (.env.local / .env.prod)
"""

import os
from pathlib import Path

import dj_database_url
from dotenv import load_dotenv

# ====================================================
# BASE DIR
# ====================================================
BASE_DIR = Path(__file__).resolve().parent.parent

# ====================================================
# ENTORNO Y CARGA DE .env
# ====================================================
DJANGO_ENV = os.getenv("DJANGO_ENV", "local")

if DJANGO_ENV == "prod":
    load_dotenv(BASE_DIR / ".env.prod")
else:
    load_dotenv(BASE_DIR / ".env.local")

# ====================================================
# CONFIGURACIÓN BÁSICA
# ====================================================
SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-dev-key")

DEBUG = os.getenv("DEBUG", "False").lower() in ("1", "true", "yes")

ALLOWED_HOSTS = os.getenv("ALLOWED_HOSTS", "localhost,127.0.0.1").split(",")

LANGUAGE_CODE = "es-co"
TIME_ZONE = "America/Bogota"
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ====================================================
# APLICACIONES
# ====================================================
INSTALLED_APPS = [
    # Django
    "django.contrib.contenttypes",

    # Internas
    "apps.common",
    "apps.household",
    "apps.control",
    "apps.optimizer",
    "apps.simulation",
]

# ====================================================
# DATABASE (registro de corridas)
# ====================================================
DATABASE_URL = os.getenv("DATABASE_URL", f"sqlite:///{BASE_DIR / 'db.sqlite3'}")

DATABASES = {
    "default": dj_database_url.parse(
        DATABASE_URL,
        conn_max_age=600,
        ssl_require=DJANGO_ENV == "prod" and not DATABASE_URL.startswith("sqlite"),
    )
}

# ====================================================
# LOGGING
# ====================================================
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}


# ====================================================
# HOMEFLEX (parámetros del solver MOMPC)
# ====================================================
def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name, default):
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


HOMEFLEX = {
    # Red de Laguerre: polo p, orden J y horizonte de predicción M
    "LAGUERRE_POLE": _env_float("HOMEFLEX_LAGUERRE_POLE", 0.8),
    "LAGUERRE_ORDER": _env_int("HOMEFLEX_LAGUERRE_ORDER", 15),
    "HORIZON": _env_int("HOMEFLEX_HORIZON", 20),

    # MOEA
    "POPULATION_SIZE": _env_int("HOMEFLEX_POPULATION_SIZE", 200),
    "MAX_ITERATIONS": _env_int("HOMEFLEX_MAX_ITERATIONS", 1000),
    "CROSSOVER_RATE": _env_float("HOMEFLEX_CROSSOVER_RATE", 0.2),
    "MUTATION_RATE": _env_float("HOMEFLEX_MUTATION_RATE", 0.8),
    "PENALTY_WEIGHT": _env_float("HOMEFLEX_PENALTY_WEIGHT", 1e4),
    "STEP_CAP": _env_float("HOMEFLEX_STEP_CAP", 1e3),
    "FEASIBILITY_TOLERANCE": _env_float("HOMEFLEX_FEASIBILITY_TOLERANCE", 1e-9),

    # Semilla global y número de procesos para corridas multi-semilla
    "SEED": _env_int("HOMEFLEX_SEED", 2024),
    "WORKERS": _env_int("HOMEFLEX_WORKERS", 1),
}

# Escenario incluido en el repositorio (hogar de referencia)
BUNDLED_SCENARIO = BASE_DIR / "apps" / "household" / "data" / "reference_home.scenario"
