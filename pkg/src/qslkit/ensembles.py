"""Reproducible random matrices and states.

Every sample is drawn from a counter-based substream keyed by
``(seed, stream, counter)``, so a sweep gives the same numbers whatever order
its tasks run in.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from . import matcore
from .errors import DomainError
from .states import DensityMatrix

GENERATOR_NAME = "numpy-Philox4x64-10+ziggurat-normal"
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SampleStream:
    """Immutable handle on one reproducible substream."""

    seed: int
    stream: int = 0
    counter: int = 0

    def generator(self) -> np.random.Generator:
        key = [self.seed & _MASK64, self.stream & _MASK64, self.counter & _MASK64]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))

    def at(self, counter: int) -> "SampleStream":
        return replace(self, counter=int(counter))

    def next(self) -> "SampleStream":
        return replace(self, counter=self.counter + 1)

    def substream(self, stream: int) -> "SampleStream":
        return SampleStream(self.seed, int(stream), 0)


RandomSource = Union[SampleStream, np.random.Generator, int]


def as_generator(src: RandomSource) -> np.random.Generator:
    """A generator for ``src``; plain ints are read as seeds on stream 0."""
    if isinstance(src, np.random.Generator):
        return src
    if isinstance(src, SampleStream):
        return src.generator()
    if isinstance(src, (int, np.integer)):
        return SampleStream(int(src)).generator()
    raise TypeError(f"cannot draw samples from {type(src).__name__}")


def ginibre(d: int, src: RandomSource, cols: int | None = None) -> np.ndarray:
    """Matrix with independent standard complex normal entries x + iy."""
    if d < 1:
        raise DomainError("d must be at least 1")
    rng = as_generator(src)
    shape = (d, d if cols is None else cols)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def haar_unitary(d: int, src: RandomSource) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix.

    The phases of R's diagonal are moved into Q so that R_ii > 0; without this
    step the distribution is not Haar.
    """
    z = ginibre(d, src)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def bures_state(d: int, src: RandomSource, *, with_resamples: bool = False):
    """State from the Bures ensemble: (1+U) A A^dag (1+U^dag), normalized."""
    if d < 2:
        raise DomainError("d must be at least 2")
    rng = as_generator(src)
    resamples = 0
    while True:
        u = haar_unitary(d, rng)
        a = ginibre(d, rng)
        b = (np.eye(d) + u) @ a
        m = b @ b.conj().T
        tr = np.trace(m).real
        if tr > 1e-14:
            break
        resamples += 1
    rho = DensityMatrix(matcore.hermitize(m / tr))
    return (rho, resamples) if with_resamples else rho


def random_hamiltonian(d: int, src: RandomSource, *, with_unitary: bool = False):
    """H = i log U for Haar U, eigenvalues on the principal branch."""
    if d < 2:
        raise DomainError("d must be at least 2")
    u = haar_unitary(d, src)
    h = matcore.matrix_log_unitary(u)
    return (h, u) if with_unitary else h


def _spectrum(d: int, rng: np.random.Generator, mode) -> np.ndarray:
    if isinstance(mode, str):
        if mode == "pure":
            p = np.zeros(d)
            p[0] = 1.0
            return p
        if mode == "mixed":
            return np.sort(bures_state(d, rng).spectrum)[::-1].copy()
        raise DomainError(f"unknown spectrum mode {mode!r}")
    mult = [int(m) for m in mode]
    if any(m < 1 for m in mult) or sum(mult) != d:
        raise DomainError("multiplicities must be positive and sum to d")
    vals = rng.exponential(size=len(mult))
    vals = vals / np.dot(vals, mult)
    return np.repeat(vals, mult)


def isospectral_pair(
    d: int, src: RandomSource, mode: Union[str, Sequence[int]] = "mixed"
) -> tuple[DensityMatrix, DensityMatrix]:
    """Random states with exactly the same eigenvalue list.

    ``mode`` is ``"pure"``, ``"mixed"`` (Bures spectrum) or a list of
    multiplicities summing to ``d``.
    """
    rng = as_generator(src)
    p = _spectrum(d, rng, mode)
    w = haar_unitary(d, rng)
    v = haar_unitary(d, rng) @ w
    rho = DensityMatrix(matcore.hermitize(matcore.from_eig(p, w)))
    sigma = DensityMatrix(matcore.hermitize(matcore.from_eig(p, v)))
    return rho, sigma
