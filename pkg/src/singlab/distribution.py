"""Finite-support atom distributions and the closed-form event probabilities
derived from them."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence


class DistributionError(ValueError):
    """Raised for malformed or degenerate distributions."""


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise DistributionError(f"boolean is not a number: {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except ValueError as exc:
            raise DistributionError(f"cannot parse rational {v!r}") from exc
    if isinstance(v, float):
        if not math.isfinite(v):
            raise DistributionError(f"non-finite value {v!r}")
        # decimal literal semantics: 0.3 means 3/10, not the nearest double
        return Fraction(repr(v))
    raise DistributionError(f"unsupported numeric type {type(v).__name__}")


@dataclass(frozen=True)
class DiscreteDist:
    """A distribution on finitely many rational atoms.

    Atoms are stored sorted ascending and probabilities are exact rationals
    summing to one. Construct through :meth:`create`, which validates the
    input and sorts atoms (probabilities follow in lockstep).
    """

    atoms: tuple[Fraction, ...]
    probs: tuple[Fraction, ...]

    @classmethod
    def create(cls, atoms: Iterable, probs: Iterable) -> "DiscreteDist":
        a = [_as_fraction(x) for x in atoms]
        p = [_as_fraction(x) for x in probs]
        if len(a) != len(p):
            raise DistributionError("atoms and probs differ in length")
        if not a:
            raise DistributionError("empty support")
        if len(a) < 2:
            raise DistributionError("need at least two atoms")
        if len(set(a)) != len(a):
            raise DistributionError("duplicate atoms")
        if any(q <= 0 for q in p):
            raise DistributionError("probabilities must be strictly positive")
        if sum(p) != 1:
            raise DistributionError(f"probabilities sum to {sum(p)}, not 1")
        items = sorted(zip(a, p))
        return cls(tuple(x for x, _ in items), tuple(q for _, q in items))

    @property
    def k(self) -> int:
        return len(self.atoms)

    def prob(self, a) -> Fraction:
        a = _as_fraction(a)
        for x, q in zip(self.atoms, self.probs):
            if x == a:
                return q
        return Fraction(0)

    def support_set(self) -> set[Fraction]:
        return set(self.atoms)

    def integer_scale(self) -> int:
        """Smallest positive integer turning every atom into an integer."""
        return reduce(math.lcm, (x.denominator for x in self.atoms), 1)

    def integer_atoms(self) -> tuple[int, ...]:
        s = self.integer_scale()
        return tuple(int(x * s) for x in self.atoms)

    def common_denominator(self) -> int:
        return reduce(math.lcm, (q.denominator for q in self.probs), 1)

    def integer_weights(self) -> tuple[tuple[int, ...], int]:
        """Return (c, D) with probs[j] == c[j] / D."""
        D = self.common_denominator()
        return tuple(int(q * D) for q in self.probs), D

    def to_json(self) -> dict:
        return {"atoms": [str(x) for x in self.atoms], "probs": [str(q) for q in self.probs]}

    def label(self) -> str:
        pairs = ",".join(f"{x}:{q}" for x, q in zip(self.atoms, self.probs))
        return "{" + pairs + "}"


def bernoulli(p) -> DiscreteDist:
    p = _as_fraction(p)
    if not 0 < p < 1:
        raise DistributionError("Bernoulli parameter must lie strictly in (0, 1)")
    return DiscreteDist.create([0, 1], [1 - p, p])


def rademacher() -> DiscreteDist:
    return DiscreteDist.create([-1, 1], [Fraction(1, 2), Fraction(1, 2)])


def uniform(atoms: Sequence) -> DiscreteDist:
    atoms = list(atoms)
    return DiscreteDist.create(atoms, [Fraction(1, len(atoms))] * len(atoms))


def parse_dist(text: str) -> DiscreteDist:
    """Parse ``ber:p``, ``rademacher``, ``uniform:a1,a2,...`` or a JSON file path."""
    t = text.strip()
    low = t.lower()
    if low.startswith("ber:"):
        return bernoulli(t[4:])
    if low == "rademacher":
        return rademacher()
    if low.startswith("uniform:"):
        parts = [x for x in t[8:].split(",") if x.strip()]
        return uniform(parts)
    path = Path(t)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DistributionError(f"cannot read distribution file {t!r}: {exc}") from exc
        if not isinstance(data, dict) or "atoms" not in data or "probs" not in data:
            raise DistributionError("distribution JSON needs 'atoms' and 'probs' lists")
        return DiscreteDist.create(data["atoms"], data["probs"])
    raise DistributionError(f"unrecognised distribution {text!r}")


# --- summary statistics ---------------------------------------------------

@dataclass(frozen=True)
class DistStats:
    entropy: float
    p_inf: Fraction
    p2_sq: Fraction
    p0: Fraction
    is_uniform: bool
    symmetric_shift: Fraction | None


def stats(d: DiscreteDist) -> DistStats:
    return DistStats(
        entropy=entropy(d),
        p_inf=p_inf(d),
        p2_sq=p2_sq(d),
        p0=p0(d),
        is_uniform=is_uniform(d),
        symmetric_shift=symmetric_shift(d),
    )


def p_inf(d: DiscreteDist) -> Fraction:
    return max(d.probs)


def p2_sq(d: DiscreteDist) -> Fraction:
    return sum((q * q for q in d.probs), Fraction(0))


def p0(d: DiscreteDist) -> Fraction:
    return d.prob(0)


def entropy(d: DiscreteDist) -> float:
    return -sum(float(q) * math.log(float(q)) for q in d.probs)


def is_uniform(d: DiscreteDist) -> bool:
    return len(set(d.probs)) == 1


def symmetric_shift(d: DiscreteDist) -> Fraction | None:
    """The s with xi and s - xi equal in law, if one exists."""
    s = d.atoms[0] + d.atoms[-1]
    for x, q in zip(d.atoms, d.probs):
        if d.prob(s - x) != q:
            return None
    return s


# --- derived distributions -------------------------------------------------

def _combine(d: DiscreteDist, sign: int) -> DiscreteDist | None:
    out: dict[Fraction, Fraction] = {}
    for x, q in zip(d.atoms, d.probs):
        for y, r in zip(d.atoms, d.probs):
            v = x + sign * y
            out[v] = out.get(v, Fraction(0)) + q * r
    keys = sorted(out)
    if len(keys) < 2:
        return None
    return DiscreteDist(tuple(keys), tuple(out[v] for v in keys))


def sum_mass_at(d: DiscreteDist, sign: int, value) -> Fraction:
    """P[xi + sign * xi' = value] for an independent copy xi'."""
    value = _as_fraction(value)
    tot = Fraction(0)
    for x, q in zip(d.atoms, d.probs):
        tot += q * d.prob(value - sign * x)
    return tot


@dataclass(frozen=True)
class DerivedDists:
    diff: DiscreteDist  # xi - xi'
    sum: DiscreteDist  # xi + xi'
    tilted: DiscreteDist  # atom a with weight proportional to P[xi = a]^2


def derived_dists(d: DiscreteDist) -> DerivedDists:
    diff = _combine(d, -1)
    sm = _combine(d, +1)
    w = p2_sq(d)
    tilted = DiscreteDist(d.atoms, tuple(q * q / w for q in d.probs))
    # diff always has at least {-(a_max-a_min), 0, a_max-a_min}; sum has >= 3 atoms
    assert diff is not None and sm is not None
    return DerivedDists(diff=diff, sum=sm, tilted=tilted)


# --- predicted probabilities -------------------------------------------------

@dataclass(frozen=True)
class Predicted:
    pE1: Fraction  # P[M e1 = 0]
    pE1minus: Fraction  # P[M (e1 - e2) = 0]
    pE1plus: Fraction  # P[M (e1 + e2) = 0]
    conjecture: Fraction

    def as_floats(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("pE1", "pE1minus", "pE1plus", "conjecture")}


def predicted_probabilities(d: DiscreteDist, n: int) -> Predicted:
    if n < 1:
        raise ValueError("n must be positive")
    q_eq = p2_sq(d)
    q_neg = sum_mass_at(d, +1, 0)
    pe1 = p0(d) ** n
    pm = q_eq ** n
    pp = q_neg ** n
    conj = 2 * n * pe1 + n * (n - 1) * (pm + pp)
    return Predicted(pE1=pe1, pE1minus=pm, pE1plus=pp, conjecture=conj)


def bernoulli_two_term(d: DiscreteDist, n: int) -> Fraction:
    """2n(1-p)^n + n(n-1)(p^2 + (1-p)^2)^n, defined only for {0,1} atoms."""
    if d.atoms != (Fraction(0), Fraction(1)):
        raise DistributionError("two-term Bernoulli formula needs atoms {0, 1}")
    p = d.probs[1]
    return 2 * n * (1 - p) ** n + n * (n - 1) * (p * p + (1 - p) ** 2) ** n
