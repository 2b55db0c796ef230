# apps/common/streams.py
"""
Flujos aleatorios deterministas.

Toda la aleatoriedad del proyecto pasa por RandomStream: una semilla de
64 bits más una clave de sub-flujo. Los hijos se derivan con
``numpy.random.SeedSequence`` (spawn_key), de modo que el resultado no
depende del orden en que se crean ni del proceso que los consume.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass
class RandomStream:
    seed: int
    stream_id: int = 0
    keys: Tuple[int, ...] = ()
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.keys = tuple(int(k) for k in self.keys)
        sequence = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(int(self.stream_id), *self.keys),
        )
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    # ---- derivación ----
    def child(self, *keys) -> "RandomStream":
        """Sub-flujo independiente identificado por ``keys`` (enteros o strings)."""
        return RandomStream(self.seed, self.stream_id, self.keys + tuple(_as_key(k) for k in keys))

    # ---- muestreo ----
    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._generator.uniform(low, high, size)

    def integer(self, low: int, high: int) -> int:
        """Entero uniforme en el intervalo cerrado [low, high]."""
        return int(self._generator.integers(low, high, endpoint=True))

    def index(self, n: int) -> int:
        return int(self._generator.integers(0, n))

    def coin(self, probability: float = 0.5) -> bool:
        return bool(self._generator.random() < probability)

    def random(self, size=None):
        return self._generator.random(size)


def _as_key(value) -> int:
    if isinstance(value, str):
        # hash estable (no depende de PYTHONHASHSEED)
        acc = 0
        for byte in value.encode("utf-8"):
            acc = (acc * 131 + byte) & 0xFFFFFFFF
        return acc
    return int(value)
