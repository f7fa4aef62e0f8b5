"""Martingale-difference gradient noise with reproducible per-replica streams.

Every model satisfies the second-moment bound
``E[|D|^2 | past] <= A * gap + C`` with ``gap = f(X_{k-1}) - f(x*)``:

* ``NONE``          -- ``D = 0``                               (A = 0, C = 0)
* ``GAUSSIAN_ISO``  -- ``D = sigma * z``                       (A = 0, C = d sigma^2)
* ``ABC_SCALED``    -- ``D = sqrt(a gap / d + sigma^2) * z``   (A = a, C = d sigma^2)

where ``z`` is a standard normal vector.  ``ABC_SCALED`` meets the bound with
equality.

Seeding
-------
A replica's generator is PCG64 seeded through :class:`numpy.random.SeedSequence`
with ``entropy=master_seed`` and ``spawn_key=(replica_index, purpose)``.
SeedSequence hashes its inputs with a fixed avalanche mix, so neighbouring
replica indices give unrelated streams.  ``counter`` advances the bit generator
by that many steps, which allows resuming a stream.  Normals come from numpy's
ziggurat sampler: runs are reproducible within one numpy build, not across
implementations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseKind", "NoiseModel", "RngStream", "sample_noise", "noise_scale"]

# substream ids within one replica
NOISE, BATCH, INIT = 0, 1, 2


class NoiseKind(str, enum.Enum):
    NONE = "NONE"
    GAUSSIAN_ISO = "GAUSSIAN_ISO"
    ABC_SCALED = "ABC_SCALED"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0
    a_coeff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma < 0 or self.a_coeff < 0:
            raise ValueError("sigma and a_coeff must be non-negative")

    def abc_constants(self, dim: int) -> tuple[float, float]:
        """The ``(A, C)`` pair of the second-moment bound."""
        if self.kind is NoiseKind.NONE:
            return 0.0, 0.0
        a = self.a_coeff if self.kind is NoiseKind.ABC_SCALED else 0.0
        return a, dim * self.sigma**2

    @property
    def needs_gap(self) -> bool:
        return self.kind is NoiseKind.ABC_SCALED and self.a_coeff > 0


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    replica_index: int = 0
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.replica_index < 0 or self.counter < 0:
            raise ValueError("replica_index and counter must be non-negative")

    def generator(self, purpose: int = NOISE) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_index, purpose))
        bitgen = np.random.PCG64(seq)
        if self.counter:
            bitgen.advance(self.counter)
        return np.random.Generator(bitgen)


def noise_scale(model: NoiseModel, gap, dim: int):
    """Per-coordinate standard deviation; ``gap`` may be an array."""
    if model.kind is NoiseKind.NONE:
        return np.zeros_like(np.asarray(gap, dtype=float))
    if model.kind is NoiseKind.GAUSSIAN_ISO:
        return np.full_like(np.asarray(gap, dtype=float), model.sigma)
    gap = np.maximum(np.asarray(gap, dtype=float), 0.0)
    return np.sqrt(model.a_coeff * gap / dim + model.sigma**2)


def sample_noise(model: NoiseModel, stream, gap: float, dim: int) -> np.ndarray:
    """Draw one noise vector.

    ``stream`` is an :class:`RngStream` or an already-open generator; pass the
    generator to keep drawing from the same sequence.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if gap < 0:
        raise ValueError("gap must be non-negative")
    if model.kind is NoiseKind.NONE:
        return np.zeros(dim)
    rng = stream.generator(NOISE) if isinstance(stream, RngStream) else stream
    return float(noise_scale(model, gap, dim)) * rng.standard_normal(dim)
