"""Lévy concentration function: exact laws of weighted sums, the
multislice-conditioned variant, the threshold function, and a Monte Carlo
fallback."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels as K
from .distribution import DiscreteDist
from .sampler import as_stream, cdf_thresholds, sample_slice_band_batch

MERGE_TOL = 1e-12
DEFAULT_BUDGET = 1 << 22


class LevyBudgetExceeded(RuntimeError):
    pass


class UnsatisfiableConstraint(ValueError):
    pass


@dataclass(frozen=True)
class SumDist:
    """Finite law as strictly increasing values with positive masses.

    ``backend`` is ``"exact"`` when values are Fractions and
    ``"merged-float"`` when values are floats merged within MERGE_TOL.
    Masses are exact rationals in both cases."""

    values: tuple
    masses: tuple[Fraction, ...]
    backend: str

    def __len__(self) -> int:
        return len(self.values)

    def total(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def as_dict(self) -> dict:
        return dict(zip(self.values, self.masses))


def _is_rational_vector(x) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in x)


def _coerce(x) -> tuple[list, bool]:
    xs = list(x.tolist() if isinstance(x, np.ndarray) else x)
    if _is_rational_vector(xs):
        return [Fraction(v) for v in xs], True
    return [float(v) for v in xs], False


def _merge_float(vals: list[float], masses: list[int]) -> tuple[list[float], list[int]]:
    order = sorted(range(len(vals)), key=vals.__getitem__)
    out_v: list[float] = []
    out_m: list[int] = []
    anchor = None
    for i in order:
        v = vals[i]
        if anchor is not None and v - anchor <= MERGE_TOL:
            out_m[-1] += masses[i]
        else:
            anchor = v
            out_v.append(v)
            out_m.append(masses[i])
    return out_v, out_m


def _finish(table: dict, denom: int, exact: bool) -> SumDist:
    if exact:
        keys = sorted(table)
        return SumDist(tuple(keys), tuple(Fraction(table[v], denom) for v in keys), "exact")
    vals, ms = _merge_float(list(table), list(table.values()))
    return SumDist(tuple(vals), tuple(Fraction(m, denom) for m in ms), "merged-float")


def sum_dist(d: DiscreteDist, x, budget: int = DEFAULT_BUDGET, method: str = "dp") -> SumDist:
    """Exact law of sum_i b_i x_i with b_i i.i.d. from d.

    ``method="dp"`` convolves one coordinate at a time keyed by partial-sum
    value (the state count is bounded by ``budget``); ``method="enumerate"``
    walks all k^n assignments and is kept as an independent check."""
    xs, exact = _coerce(x)
    c, D = d.integer_weights()
    atoms = d.atoms if exact else [float(a) for a in d.atoms]
    n = len(xs)
    if method == "enumerate":
        if d.k**n > budget:
            raise LevyBudgetExceeded(f"{d.k}^{n} assignments exceed budget {budget}")
        table: dict = {}
        for idx in itertools.product(range(d.k), repeat=n):
            v = sum((atoms[j] * xi for j, xi in zip(idx, xs)), Fraction(0) if exact else 0.0)
            w = math.prod(c[j] for j in idx)
            table[v] = table.get(v, 0) + w
        return _finish(table, D**n, exact)
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    table = {Fraction(0) if exact else 0.0: 1}
    for xi in xs:
        nxt: dict = {}
        for v, w in table.items():
            for a, cj in zip(atoms, c):
                u = v + a * xi
                nxt[u] = nxt.get(u, 0) + w * cj
        if not exact:
            vals, ms = _merge_float(list(nxt), list(nxt.values()))
            nxt = dict(zip(vals, ms))
        if len(nxt) > budget:
            raise LevyBudgetExceeded(f"{len(nxt)} partial sums exceed budget {budget}")
        table = nxt
    return _finish(table, D**n, exact)


def _radius(r, exact: bool):
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return Fraction(r) if exact else float(r)


def levy_window(s: SumDist, r) -> tuple[Fraction, object]:
    """(max closed-window mass, left end of a maximising window)."""
    exact = s.backend == "exact"
    width = 2 * _radius(r, exact)
    tol = 0 if exact else MERGE_TOL
    vals = s.values
    best = Fraction(0)
    arg = vals[0]
    j = 0
    acc = Fraction(0)
    # window [vals[i], vals[i] + width]; acc holds masses of i..j-1
    for i in range(len(vals)):
        if j < i:
            j = i
            acc = Fraction(0)
        while j < len(vals) and vals[j] - vals[i] <= width + tol:
            acc += s.masses[j]
            j += 1
        if acc > best:
            best, arg = acc, vals[i]
        acc -= s.masses[i]
    return best, arg


def levy(s: SumDist, r) -> Fraction:
    """sup_z P[|S - z| <= r]."""
    return levy_window(s, r)[0]


def convolve(a: SumDist, b: SumDist) -> SumDist:
    """Law of X + Y for independent X ~ a, Y ~ b."""
    exact = a.backend == b.backend == "exact"
    table: dict = {}
    for v, m in zip(a.values, a.masses):
        for u, q in zip(b.values, b.masses):
            key = v + u if exact else float(v) + float(u)
            table[key] = table.get(key, Fraction(0)) + m * q
    if exact:
        keys = sorted(table)
        return SumDist(tuple(keys), tuple(table[k] for k in keys), "exact")
    vals, ms = _merge_float(list(table), list(table.values()))
    return SumDist(tuple(vals), tuple(ms), "merged-float")


# --- multislice conditioning ------------------------------------------------------

@dataclass(frozen=True)
class SliceConstraint:
    """Per-atom count bands lower[j] <= #{i: b_i = a_j} <= upper[j]."""

    n: int
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("band endpoints differ in length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)) or sum(self.lower) > self.n or sum(
            self.upper
        ) < self.n:
            raise UnsatisfiableConstraint(f"no count vector fits bands {self.lower}..{self.upper} with sum {self.n}")

    @classmethod
    def from_gamma(cls, d: DiscreteDist, n: int, gamma) -> "SliceConstraint":
        gs = list(gamma) if isinstance(gamma, (list, tuple)) else [gamma] * d.k
        if len(gs) != d.k:
            raise ValueError("one gamma per atom required")
        lo, hi = [], []
        for p, g in zip(d.probs, gs):
            g = Fraction(g) if not isinstance(g, float) else Fraction(repr(g))
            lo.append(max(0, math.ceil(p * n - g * n)))
            hi.append(min(n, math.floor(p * n + g * n)))
        return cls(n, tuple(lo), tuple(hi))

    @classmethod
    def exact_counts(cls, m: Sequence[int]) -> "SliceConstraint":
        return cls(sum(m), tuple(m), tuple(m))

    @classmethod
    def unconstrained(cls, k: int, n: int) -> "SliceConstraint":
        return cls(n, (0,) * k, (n,) * k)

    def admits(self, counts: Sequence[int]) -> bool:
        return sum(counts) == self.n and all(lo <= c <= hi for c, lo, hi in zip(counts, self.lower, self.upper))


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int


def conditional_sum_dist(
    d: DiscreteDist, x, c: SliceConstraint, budget: int = DEFAULT_BUDGET
) -> tuple[SumDist, Fraction]:
    """Law of sum_i b_i x_i conditioned on the band event, and the band event's
    probability. The DP state is (atom-count vector, partial-sum value)."""
    xs, exact = _coerce(x)
    if len(xs) != c.n:
        raise ValueError("vector length must equal the constraint's n")
    if len(c.lower) != d.k:
        raise ValueError("constraint has the wrong number of atoms")
    weights, D = d.integer_weights()
    atoms = d.atoms if exact else [float(a) for a in d.atoms]
    k = d.k
    zero = Fraction(0) if exact else 0.0
    states: dict[tuple, dict] = {(0,) * k: {zero: 1}}
    for step, xi in enumerate(xs):
        remaining = c.n - step - 1
        nxt: dict[tuple, dict] = {}
        for counts, table in states.items():
            for j in range(k):
                if counts[j] + 1 > c.upper[j]:
                    continue
                new = counts[:j] + (counts[j] + 1,) + counts[j + 1 :]
                # the other coordinates must still be able to meet the lower bands
                deficit = sum(max(0, lo - cc) for lo, cc in zip(c.lower, new))
                if deficit > remaining:
                    continue
                dest = nxt.setdefault(new, {})
                shift = atoms[j] * xi
                cj = weights[j]
                for v, w in table.items():
                    u = v + shift
                    dest[u] = dest.get(u, 0) + w * cj
        if not exact:
            for key, table in nxt.items():
                vals, ms = _merge_float(list(table), list(table.values()))
                nxt[key] = dict(zip(vals, ms))
        size = sum(len(t) for t in nxt.values())
        if size > budget:
            raise LevyBudgetExceeded(f"{size} (count, value) states exceed budget {budget}")
        states = nxt
    merged: dict = {}
    for counts, table in states.items():
        if not c.admits(counts):
            continue
        for v, w in table.items():
            merged[v] = merged.get(v, 0) + w
    total = sum(merged.values())
    if total == 0:
        raise UnsatisfiableConstraint("band event has probability zero")
    band_prob = Fraction(total, D**c.n)
    if exact:
        keys = sorted(merged)
        return SumDist(tuple(keys), tuple(Fraction(merged[v], total) for v in keys), "exact"), band_prob
    vals, ms = _merge_float(list(merged), list(merged.values()))
    return SumDist(tuple(vals), tuple(Fraction(m, total) for m in ms), "merged-float"), band_prob


def levy_conditional(
    d: DiscreteDist,
    x,
    c: SliceConstraint,
    r,
    budget: int = DEFAULT_BUDGET,
    mc_samples: int = 100_000,
    rng=0,
):
    """Conditional concentration L_{xi,gamma}(sum b_i x_i, r).

    Returns an exact Fraction, or an :class:`MCEstimate` when the DP state
    space exceeds ``budget``."""
    try:
        s, _ = conditional_sum_dist(d, x, c, budget)
    except LevyBudgetExceeded:
        xs = np.array([float(v) for v in (x.tolist() if isinstance(x, np.ndarray) else x)])
        idx, _ = sample_slice_band_batch(d, c, rng, mc_samples)
        vals = np.array([float(a) for a in d.atoms])[idx] @ xs
        best, _ = K.max_window_count(np.sort(vals), 2 * float(r) + MERGE_TOL)
        p = best / mc_samples
        return MCEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / mc_samples), mc_samples)
    return levy(s, r)


def klr_ratio(d: DiscreteDist, x, r, radii: Sequence | None = None) -> float:
    """L(S, r) * sqrt(sum_i (1 - L(b_i x_i, r_i)) r_i^2) / r for S = sum b_i x_i.

    The anticoncentration inequality bounds this by an absolute constant when
    r >= max r_i; the value is a diagnostic, not a checked bound. Radii
    default to r for every coordinate."""
    xs, _ = _coerce(x)
    rs = [r] * len(xs) if radii is None else list(radii)
    if len(rs) != len(xs) or any(float(ri) <= 0 for ri in rs) or float(r) < max(float(ri) for ri in rs):
        raise ValueError("need positive radii r_i <= r, one per coordinate")
    spread = sum((1 - float(levy(sum_dist(d, [xi]), ri))) * float(ri) ** 2 for xi, ri in zip(xs, rs))
    return float(levy(sum_dist(d, xs), r)) * math.sqrt(spread) / float(r)


# --- threshold function ---------------------------------------------------------

def _critical_radii(s: SumDist, cap) -> list:
    exact = s.backend == "exact"
    vals = s.values
    out = set()
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            g = (vals[j] - vals[i]) / 2
            if g >= cap:
                break
            out.add(g)
    return sorted(out) if exact else sorted(float(g) for g in out)


def threshold_from_sumdist(s: SumDist, L) -> Fraction | float:
    """sup{t in (0,1): L(S, t) > L*t}, or 0 when no t qualifies.

    The window-mass g(t) is a right-continuous step function jumping at the
    half-gaps between atoms. On a piece [c_m, c_{m+1}) where g = G_m the
    condition holds exactly for t < G_m / L, so the sup is found by scanning
    pieces from the top."""
    exact = s.backend == "exact"
    Lr = Fraction(L) if exact else float(L)
    if Lr < 1:
        raise ValueError("L must be at least 1")
    one = Fraction(1) if exact else 1.0
    cap = min(one, one / Lr)  # g <= 1, so only t < 1/L can qualify
    starts = [Fraction(0) if exact else 0.0] + [g for g in _critical_radii(s, cap) if g > 0]
    ends = starts[1:] + [one]
    for c_m, c_next in zip(reversed(starts), reversed(ends)):
        G = levy(s, c_m)
        top = min(c_next, G / Lr, one)
        if top > c_m:
            return top
    return Fraction(0) if exact else 0.0


def threshold(
    d: DiscreteDist, x, L, budget: int = DEFAULT_BUDGET, constraint: SliceConstraint | None = None
) -> Fraction | float:
    xs, exact = _coerce(x)
    norm2 = sum(float(v) ** 2 for v in xs)
    if abs(norm2 - 1.0) > 1e-10:
        raise ValueError("x must be a unit vector")
    if constraint is None:
        s = sum_dist(d, xs, budget)
    else:
        s, _ = conditional_sum_dist(d, xs, constraint, budget)
    return threshold_from_sumdist(s, L)


# --- Monte Carlo ---------------------------------------------------------------

def levy_mc(d: DiscreteDist, x, r, samples: int, rng, workers: int = 1, chunk: int = 1 << 20) -> MCEstimate:
    """Monte Carlo estimate of L(sum b_i x_i, r).

    Sample s uses stream counters s*n .. s*n + n - 1, so the estimate does
    not depend on ``workers``."""
    if samples < 1:
        raise ValueError("samples must be positive")
    xs = np.ascontiguousarray([float(v) for v in (x.tolist() if isinstance(x, np.ndarray) else x)], dtype=np.float64)
    stream = as_stream(rng)
    th = cdf_thresholds(d)
    vals = np.array([float(a) for a in d.atoms])
    n = xs.shape[0]
    parts = []
    base = -(-stream.counter // max(n, 1))
    for lo in range(0, samples, chunk):
        cnt = min(chunk, samples - lo)
        parts.append(K.weighted_sums(stream.k1, stream.k2, base + lo, cnt, th, vals, xs, max(1, workers)))
    stream.counter = (base + samples) * n
    sums = np.sort(np.concatenate(parts))
    best, _ = K.max_window_count(sums, 2 * float(r) + MERGE_TOL)
    p = best / samples
    return MCEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / samples), samples)
