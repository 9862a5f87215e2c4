"""Seeded generation of i.i.d. matrices, multislices and band-conditioned
vectors.

Every random quantity is derived from a keyed counter hash (see
``_kernels.draw``), so a stream is fully described by ``(seed, stream)`` and a
position. The integer-only path makes samples identical across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels as K
from .distribution import DiscreteDist


def _mix_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * K.M1) & K.MASK64
    z = ((z ^ (z >> 27)) * K.M2) & K.MASK64
    return z ^ (z >> 31)


def draw_py(k1: int, k2: int, counter: int) -> int:
    """Pure-Python reference for the compiled draw."""
    return _mix_py((_mix_py((counter * K.GAMMA + k1) & K.MASK64) + k2) & K.MASK64)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(K.M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(K.M2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 1 << 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream < 0:
            raise ValueError("stream must be nonnegative")

    def keys(self) -> tuple[int, int]:
        a = _mix_py((self.seed * K.GAMMA + 0x5851F42D4C957F2D) & K.MASK64)
        k1 = _mix_py((a + (self.stream + 1) * K.GAMMA) & K.MASK64)
        k2 = _mix_py((k1 ^ 0xD1B54A32D192ED03) & K.MASK64) | 1
        return k1, k2

    def spawn(self, stream: int) -> "RngSeed":
        return RngSeed(self.seed, stream)


@dataclass
class CounterStream:
    """A position inside a keyed counter stream."""

    rng: RngSeed
    counter: int = 0
    _keys: tuple[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._keys = self.rng.keys()

    @property
    def k1(self) -> np.uint64:
        return np.uint64(self._keys[0])

    @property
    def k2(self) -> np.uint64:
        return np.uint64(self._keys[1])

    def u64(self, count: int) -> np.ndarray:
        c = np.arange(self.counter, self.counter + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            inner = _mix_np(c * np.uint64(K.GAMMA) + self.k1)
            return _mix_np(inner + self.k2)

    def skip(self, count: int) -> None:
        self.counter += count


def as_stream(rng) -> CounterStream:
    if isinstance(rng, CounterStream):
        return rng
    if isinstance(rng, RngSeed):
        return CounterStream(rng)
    if isinstance(rng, (int, np.integer)):
        return CounterStream(RngSeed(int(rng)))
    raise TypeError(f"cannot build a random stream from {type(rng).__name__}")


def cdf_thresholds(d: DiscreteDist) -> np.ndarray:
    """floor(2**64 * (p_1 + ... + p_j)) for j < k, as uint64.

    A uniform 64-bit word u maps to the number of thresholds <= u."""
    acc = Fraction(0)
    out = []
    for q in d.probs[:-1]:
        acc += q
        out.append(int(acc * (1 << 64)))
    return np.array(out, dtype=np.uint64)


def indices_from_u64(u: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return np.searchsorted(thresholds, u, side="right").astype(np.uint8)


def uniform_below(stream: CounterStream, bound: int) -> int:
    """Exact uniform integer in [0, bound) by rejection on 64-bit words."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    limit = (1 << 64) - ((1 << 64) % bound)
    while True:
        u = int(stream.u64(1)[0])
        if u < limit:
            return u % bound


# --- matrices ---------------------------------------------------------------

@dataclass(frozen=True)
class MatrixSample:
    dist: DiscreteDist
    entries: np.ndarray  # uint8 atom indices, shape (n_rows, n_cols)

    def __post_init__(self):
        if self.entries.ndim != 2 or min(self.entries.shape) < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.entries.size and int(self.entries.max()) >= self.dist.k:
            raise ValueError("atom index out of range")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def values(self) -> np.ndarray:
        return np.array([float(a) for a in self.dist.atoms])[self.entries]

    def integer_values(self) -> np.ndarray:
        """Entries scaled by the atoms' common denominator, as int64."""
        ints = np.array(self.dist.integer_atoms(), dtype=np.int64)
        return ints[self.entries]

    def rational_rows(self) -> list[list[Fraction]]:
        return [[self.dist.atoms[j] for j in row] for row in self.entries.tolist()]


def sample_matrix(d: DiscreteDist, n: int, rng, n_cols: int | None = None) -> MatrixSample:
    if n < 1:
        raise ValueError("n must be positive")
    cols = n if n_cols is None else n_cols
    s = as_stream(rng)
    idx = indices_from_u64(s.u64(n * cols), cdf_thresholds(d))
    return MatrixSample(d, idx.reshape(n, cols))


def sample_vector(d: DiscreteDist, n: int, rng) -> np.ndarray:
    """n i.i.d. atom indices."""
    s = as_stream(rng)
    return indices_from_u64(s.u64(n), cdf_thresholds(d))


# --- multislices --------------------------------------------------------------

def sample_multislice(atoms: Sequence, m: Sequence[int], rng) -> list:
    """Uniform arrangement of the multiset with m[j] copies of atoms[j]."""
    if len(atoms) != len(m):
        raise ValueError("atoms and counts differ in length")
    if any(c < 0 for c in m):
        raise ValueError("counts must be nonnegative")
    s = as_stream(rng)
    out = [a for a, c in zip(atoms, m) for _ in range(c)]
    for i in range(len(out) - 1, 0, -1):
        j = uniform_below(s, i + 1)
        out[i], out[j] = out[j], out[i]
    return out


class RejectionBudgetExhausted(RuntimeError):
    def __init__(self, tries: int, accepted: int):
        self.tries = tries
        self.acceptance_estimate = accepted / tries if tries else 0.0
        super().__init__(
            f"band sampling gave up after {tries} draws "
            f"(acceptance estimate {self.acceptance_estimate:.3g})"
        )


def _band_ok(counts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.all((counts >= lo) & (counts <= hi), axis=-1)


def sample_slice_band(d: DiscreteDist, c, rng, max_tries: int = 1_000_000) -> np.ndarray:
    """One vector of atom indices drawn from xi^n conditioned on the band event.

    Attempt a consumes the next n draws of the stream, so repeated calls on a
    shared stream agree with :func:`sample_slice_band_batch`."""
    s = as_stream(rng)
    th = cdf_thresholds(d)
    lo = np.asarray(c.lower)
    hi = np.asarray(c.upper)
    for _ in range(max_tries):
        idx = indices_from_u64(s.u64(c.n), th)
        counts = np.bincount(idx, minlength=d.k)
        if _band_ok(counts, lo, hi):
            return idx
    raise RejectionBudgetExhausted(max_tries, 0)


def sample_slice_band_batch(
    d: DiscreteDist, c, rng, size: int, max_tries: int | None = None, chunk: int = 1 << 16
) -> tuple[np.ndarray, int]:
    """``size`` accepted vectors (rows) and the number of attempts used."""
    s = as_stream(rng)
    th = cdf_thresholds(d)
    lo = np.asarray(c.lower)
    hi = np.asarray(c.upper)
    if max_tries is None:
        max_tries = 1000 * size + 10_000
    got: list[np.ndarray] = []
    have = 0
    tries = 0
    while have < size:
        if tries >= max_tries:
            raise RejectionBudgetExhausted(tries, have)
        b = min(chunk, max_tries - tries)
        idx = indices_from_u64(s.u64(b * c.n), th).reshape(b, c.n)
        counts = np.stack([(idx == j).sum(axis=1) for j in range(d.k)], axis=1)
        ok = np.flatnonzero(_band_ok(counts, lo, hi))
        need = size - have
        if ok.size >= need:
            # rewind so the stream sits right after the last used attempt
            last = int(ok[need - 1])
            s.counter -= (b - last - 1) * c.n
            tries += last + 1
            got.append(idx[ok[:need]])
            have = size
        else:
            tries += b
            got.append(idx[ok])
            have += ok.size
    return np.concatenate(got, axis=0), tries
