# apps/control/laguerre.py
"""
Red de Laguerre discreta y operadores de predicción del modelo de estado.

Bloques de coeficientes η = [η_s, η_1, …, η_ℓ], cada uno de longitud J.
La señal reconstruida es una *desviación*: la batería alrededor de 0 y
cada electrodoméstico regulable alrededor de su potencia nominal.

Estado x = [E_s, C_p]ᵀ:
    x(t+1) = A·x(t) + B·u(t),   A = [[ρ, 0], [0, 1]],   B = [[Δt, 0…0], [0, 1…1]]
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from django.conf import settings

from apps.common.exceptions import ParameterError, SlotRangeError

logger = logging.getLogger(__name__)


def _frozen(array) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LaguerreSettings:
    pole: float = 0.8
    order: int = 15
    horizon: int = 20

    @classmethod
    def from_settings(cls, **overrides) -> "LaguerreSettings":
        conf = getattr(settings, "HOMEFLEX", {})
        values = {
            "pole": conf.get("LAGUERRE_POLE", cls.pole),
            "order": conf.get("LAGUERRE_ORDER", cls.order),
            "horizon": conf.get("HORIZON", cls.horizon),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(pole=float(values["pole"]), order=int(values["order"]), horizon=int(values["horizon"]))


# ====================================================
# Base de Laguerre
# ====================================================
@dataclass(frozen=True)
class LaguerreBasis:
    pole: float
    order: int
    horizon: int
    transition: np.ndarray  # A_la (J×J)
    vectors: np.ndarray     # fila m = L(m)ᵀ, forma (M, J)

    def at(self, m: int) -> np.ndarray:
        if not 0 <= m < self.horizon:
            raise SlotRangeError(f"m={m} fuera del horizonte 0..{self.horizon - 1}")
        return self.vectors[m]

    def peak(self) -> np.ndarray:
        """max_m |l_j(m)| por función de la base."""
        return np.abs(self.vectors).max(axis=0)


def laguerre_transition(pole: float, order: int) -> np.ndarray:
    beta = 1.0 - pole * pole
    a_la = np.zeros((order, order))
    for i in range(order):
        a_la[i, i] = pole
        for j in range(i):
            a_la[i, j] = (-pole) ** (i - j - 1) * beta
    return a_la


@lru_cache(maxsize=64)
def build_basis(pole: float, order: int, horizon: int) -> LaguerreBasis:
    if not 0.0 <= pole < 1.0:
        raise ParameterError(f"El polo de Laguerre debe estar en [0, 1) (vale {pole})")
    if order < 1:
        raise ParameterError(f"El orden J debe ser ≥ 1 (vale {order})")
    if horizon < 1:
        raise ParameterError(f"El horizonte M debe ser ≥ 1 (vale {horizon})")

    a_la = laguerre_transition(pole, order)
    vectors = np.empty((horizon, order))
    vectors[0] = np.sqrt(1.0 - pole * pole) * (-pole) ** np.arange(order)
    for m in range(1, horizon):
        vectors[m] = a_la @ vectors[m - 1]
    return LaguerreBasis(pole=float(pole), order=int(order), horizon=int(horizon),
                         transition=_frozen(a_la), vectors=_frozen(vectors))


def coefficient_count(basis: LaguerreBasis, flexible_count: int) -> int:
    return (1 + flexible_count) * basis.order


def reconstruct_controls(basis: LaguerreBasis, eta, flexible_count: int) -> np.ndarray:
    """Matriz (1+ℓ)×M de desviaciones: fila 0 batería, filas 1..ℓ regulables."""
    eta = np.asarray(eta, dtype=float)
    expected = coefficient_count(basis, flexible_count)
    if eta.shape != (expected,):
        raise ParameterError(f"η debe tener {expected} coeficientes, tiene {eta.size}")
    return eta.reshape(1 + flexible_count, basis.order) @ basis.vectors.T


# ====================================================
# Modelo de estado y operadores de predicción
# ====================================================
@dataclass(frozen=True)
class StateSpaceModel:
    leakage: float
    dt: float
    flexible_count: int

    @classmethod
    def from_scenario(cls, scenario) -> "StateSpaceModel":
        return cls(scenario.battery.leakage_per_slot, scenario.grid.slot_duration, scenario.flexible_count)

    @property
    def A(self) -> np.ndarray:
        return np.array([[self.leakage, 0.0], [0.0, 1.0]])

    @property
    def B(self) -> np.ndarray:
        b = np.zeros((2, 1 + self.flexible_count))
        b[0, 0] = self.dt
        b[1, 1:] = 1.0
        return b

    def step(self, x, u) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float)


@dataclass(frozen=True)
class PredictionOperators:
    G: np.ndarray         # (M, 1+ℓ, (1+ℓ)·J)
    phi: np.ndarray       # (M+1, 2, (1+ℓ)·J), phi[0] = 0
    A_powers: np.ndarray  # (M+1, 2, 2)

    @property
    def horizon(self) -> int:
        return self.G.shape[0]


def build_prediction(basis: LaguerreBasis, model: StateSpaceModel) -> PredictionOperators:
    blocks = 1 + model.flexible_count
    n = blocks * basis.order
    eye = np.eye(blocks)
    A, B = model.A, model.B

    G = np.empty((basis.horizon, blocks, n))
    phi = np.zeros((basis.horizon + 1, 2, n))
    powers = np.empty((basis.horizon + 1, 2, 2))
    powers[0] = np.eye(2)
    for m in range(basis.horizon):
        G[m] = np.kron(eye, basis.vectors[m][None, :])
        phi[m + 1] = A @ phi[m] + B @ G[m]
        powers[m + 1] = A @ powers[m]
    return PredictionOperators(G=_frozen(G), phi=_frozen(phi), A_powers=_frozen(powers))


def predict_state(ops: PredictionOperators, x0, eta, m: int) -> np.ndarray:
    """x(t+m|t) = A^m·x(t) + φ(m)·η."""
    if not 0 <= m <= ops.horizon:
        raise SlotRangeError(f"m={m} fuera de 0..{ops.horizon}")
    return ops.A_powers[m] @ np.asarray(x0, dtype=float) + ops.phi[m] @ np.asarray(eta, dtype=float)


def predict_trajectory(ops: PredictionOperators, x0, eta) -> np.ndarray:
    """Estados x(t+1..t+M), forma (M, 2)."""
    x0 = np.asarray(x0, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.einsum("mij,j->mi", ops.A_powers[1:], x0) + np.einsum("mij,j->mi", ops.phi[1:], eta)
