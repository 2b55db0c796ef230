# apps/common/exceptions.py
"""
Jerarquía de errores de HomeFlex.

Cada error hereda además de la excepción estándar más cercana
(ValueError, IndexError) para que el código que ya captura esas
excepciones siga funcionando.
"""


class HomeFlexError(Exception):
    """Raíz de todos los errores del proyecto."""


class ParameterError(HomeFlexError, ValueError):
    """Parámetro fuera de dominio o dimensiones incompatibles."""


class SlotRangeError(HomeFlexError, IndexError):
    """Slot (1-based) o índice de horizonte fuera de rango."""


class ConstraintViolationError(HomeFlexError, ValueError):
    """Una entrada viola una restricción física (arranque, tasa de batería...)."""


class PreconditionError(HomeFlexError):
    """Se llamó una operación con un punto que no cumple su precondición."""


class InfeasibleScenarioError(HomeFlexError):
    """El conjunto factible no contiene el punto de referencia esperado."""

    def __init__(self, message, row_label=None, slack=None):
        super().__init__(message, row_label, slack)
        self.message = message
        self.row_label = row_label
        self.slack = slack

    def __str__(self):
        return str(self.message)


class SolverError(HomeFlexError):
    """Fallo interno de un solver."""


class SimulationAborted(SolverError):
    """La simulación receding-horizon se detuvo en un slot concreto."""

    def __init__(self, slot, cause):
        # args completos: la excepción viaja entre procesos (ProcessPoolExecutor)
        super().__init__(slot, cause)
        self.slot = slot
        self.cause = cause

    def __str__(self):
        return f"Simulación abortada en el slot {self.slot}: {self.cause}"
