# conftest.py
import pytest
from django.conf import settings

from apps.household.loader import load_scenario


@pytest.fixture(scope="session")
def reference_home():
    """Escenario de referencia incluido en el repo (24 slots)."""
    return load_scenario(settings.BUNDLED_SCENARIO)
