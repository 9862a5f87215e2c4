"""Exact enumeration of singularity probabilities and of the dominant
zero/duplicate-line event for small matrices."""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .distribution import DiscreteDist, p0, p2_sq, sum_mass_at

DEFAULT_BUDGET = 1 << 28


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ExactResult:
    probability: Fraction
    matrices_scanned: int
    elapsed: float

    def to_json(self) -> dict:
        return {
            "probability": f"{self.probability.numerator}/{self.probability.denominator}",
            "scanned": self.matrices_scanned,
            "seconds": self.elapsed,
        }


# --- fraction-free linear algebra ------------------------------------------

def bareiss_det(rows: list[list[int]]) -> int:
    """Determinant of a square integer matrix by fraction-free elimination."""
    a = [list(r) for r in rows]
    n = len(a)
    if any(len(r) != n for r in a):
        raise ValueError("matrix is not square")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for c in range(n - 1):
        if a[c][c] == 0:
            for r in range(c + 1, n):
                if a[r][c] != 0:
                    a[c], a[r] = a[r], a[c]
                    sign = -sign
                    break
            else:
                return 0
        pc = a[c][c]
        for r in range(c + 1, n):
            arc = a[r][c]
            row_r = a[r]
            row_c = a[c]
            for j in range(c + 1, n):
                row_r[j] = (row_r[j] * pc - arc * row_c[j]) // prev
            row_r[c] = 0
        prev = pc
    return sign * a[-1][-1]


def exact_rank(rows: list[list[int]]) -> int:
    """Rank of an integer matrix (any shape) by fraction-free elimination."""
    a = [list(r) for r in rows]
    if not a:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    prev = 1
    for c in range(n):
        piv = next((r for r in range(rank, m) if a[r][c] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        pc = a[rank][c]
        for r in range(rank + 1, m):
            arc = a[r][c]
            for j in range(c, n):
                a[r][j] = (a[r][j] * pc - arc * a[rank][j]) // prev
        prev = pc
        rank += 1
        if rank == m:
            break
    return rank


def to_integer_rows(rows) -> list[list[int]]:
    """Clear denominators of a rational matrix row by row."""
    out = []
    for r in rows:
        fr = [Fraction(v) for v in r]
        s = math.lcm(*(v.denominator for v in fr)) if fr else 1
        out.append([int(v * s) for v in fr])
    return out


def _reduce(v: list[int], basis: list[tuple[int, list[int]]]) -> list[int] | None:
    """Eliminate v against an echelon basis; None when v lies in its span."""
    v = list(v)
    for piv, b in basis:
        if v[piv]:
            f, g = b[piv], v[piv]
            v = [f * x - g * y for x, y in zip(v, b)]
            h = math.gcd(*v)
            if h > 1:
                v = [x // h for x in v]
    for i, x in enumerate(v):
        if x:
            return v
    return None


def _pivot(v: list[int]) -> int:
    return next(i for i, x in enumerate(v) if x)


# --- singularity enumeration --------------------------------------------------

def _check_budget(k: int, n: int, budget: int) -> None:
    if n < 1:
        raise ValueError("n must be positive")
    if k ** (n * n) > budget:
        raise BudgetExceeded(f"{k}^{n * n} assignments exceed the budget {budget}")


def _row_table(d: DiscreteDist, n: int) -> list[tuple[list[int], int]]:
    ints = d.integer_atoms()
    c, _ = d.integer_weights()
    table = []
    for idx in itertools.product(range(d.k), repeat=n):
        table.append(([ints[j] for j in idx], math.prod(c[j] for j in idx)))
    return table


def _singular_weight(table, n: int, D_row: int, first: range) -> int:
    """Integer weight of singular matrices whose first row index lies in ``first``.

    Rows are added one at a time; once a row falls into the span of the rows
    above it, every completion is singular and is counted in bulk."""

    def rec(depth: int, basis, w: int) -> int:
        acc = 0
        rest = D_row ** (n - depth - 1)
        for v, wv in table:
            r = _reduce(v, basis)
            if r is None:
                acc += w * wv * rest
            elif depth + 1 < n:
                acc += rec(depth + 1, basis + [(_pivot(r), r)], w * wv)
        return acc

    acc = 0
    rest = D_row ** (n - 1)
    for i in first:
        v, wv = table[i]
        if not any(v):
            acc += wv * rest
        elif n > 1:
            acc += rec(1, [(_pivot(v), v)], wv)
    return acc


def _blocks(total: int, workers: int) -> list[range]:
    size = -(-total // workers)
    return [range(i, min(total, i + size)) for i in range(0, total, size)]


def enumerate_singularity(
    d: DiscreteDist, n: int, budget: int = DEFAULT_BUDGET, workers: int = 1
) -> ExactResult:
    """Exact P[det M = 0] for an n x n matrix of i.i.d. entries from d."""
    _check_budget(d.k, n, budget)
    t0 = time.perf_counter()
    _, D = d.integer_weights()
    D_row = D ** n
    table = _row_table(d, n)
    parts = _blocks(len(table), max(1, workers))
    if workers > 1 and len(parts) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            weights = list(ex.map(_singular_weight, [table] * len(parts), [n] * len(parts),
                                  [D_row] * len(parts), parts))
    else:
        weights = [_singular_weight(table, n, D_row, p) for p in parts]
    prob = Fraction(sum(weights), D_row ** n)
    return ExactResult(prob, d.k ** (n * n), time.perf_counter() - t0)


# --- vectorised event enumeration -------------------------------------------------

def enumerate_event(
    d: DiscreteDist,
    n: int,
    event: Callable[[np.ndarray], np.ndarray],
    budget: int = DEFAULT_BUDGET,
    chunk: int = 1 << 18,
) -> ExactResult:
    """Exact probability of ``event`` over all k^(n*n) matrices.

    ``event`` receives a (batch, n, n) int64 array of integer-scaled entries
    and returns a boolean mask. Masses are accumulated per atom-count vector
    and combined exactly at the end."""
    _check_budget(d.k, n, budget)
    t0 = time.perf_counter()
    k = d.k
    nn = n * n
    total = k ** nn
    ints = np.array(d.integer_atoms(), dtype=np.int64)
    powers = k ** np.arange(nn - 1, -1, -1, dtype=np.int64)
    base = nn + 1
    code_w = base ** np.arange(k, dtype=np.int64)
    hits: dict[int, int] = {}
    for lo in range(0, total, chunk):
        lin = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = (lin[:, None] // powers[None, :]) % k
        mask = event(ints[digits].reshape(-1, n, n))
        if not mask.any():
            continue
        sel = digits[mask]
        counts = np.stack([(sel == j).sum(axis=1) for j in range(k)], axis=1)
        codes, mult = np.unique(counts @ code_w, return_counts=True)
        for cd, m in zip(codes.tolist(), mult.tolist()):
            hits[cd] = hits.get(cd, 0) + m
    prob = Fraction(0)
    for cd, m in hits.items():
        w = Fraction(m)
        for j in range(k):
            w *= d.probs[j] ** ((cd // base**j) % base)
        prob += w
    return ExactResult(prob, total, time.perf_counter() - t0)


def dominant_union_mask(vals: np.ndarray) -> np.ndarray:
    n = vals.shape[1]
    hit = np.any(np.all(vals == 0, axis=2), axis=1) | np.any(np.all(vals == 0, axis=1), axis=1)
    for i in range(n):
        for j in range(i + 1, n):
            ri, rj = vals[:, i, :], vals[:, j, :]
            ci, cj = vals[:, :, i], vals[:, :, j]
            hit |= np.all(ri == rj, axis=1) | np.all(ri == -rj, axis=1)
            hit |= np.all(ci == cj, axis=1) | np.all(ci == -cj, axis=1)
    return hit


def enumerate_dominant_union(d: DiscreteDist, n: int, budget: int = DEFAULT_BUDGET) -> ExactResult:
    """Exact probability that some row or column vanishes or two rows (or two
    columns) agree up to sign."""
    return enumerate_event(d, n, dominant_union_mask, budget)


def enumerate_kernel_event(d: DiscreteDist, n: int, v, budget: int = DEFAULT_BUDGET) -> ExactResult:
    """Exact P[M v = 0] for an integer vector v."""
    vec = np.array([int(x) for x in v], dtype=np.int64)
    if vec.shape != (n,):
        raise ValueError("vector length must equal n")
    return enumerate_event(d, n, lambda vals: np.all(vals @ vec == 0, axis=1), budget)


# --- truncated inclusion-exclusion -----------------------------------------------

def _pair_terms(d: DiscreteDist, n: int, sides: str) -> tuple[Fraction, Fraction]:
    """(S1, S2) for the atomic events: line i vanishes, and lines i, j satisfy
    line_i = +line_j or line_i = -line_j, over rows and/or columns."""
    z = p0(d)
    q = {1: p2_sq(d), -1: sum_mass_at(d, +1, 0)}

    def t3(s1: int, s2: int) -> Fraction:
        return sum((pa * d.prob(s1 * a) * d.prob(s2 * a) for a, pa in zip(d.atoms, d.probs)), Fraction(0))

    def t4(s1: int, s2: int) -> Fraction:
        return sum(
            (pa * d.prob(s1 * a) * d.prob(s2 * a) * d.prob(s1 * s2 * a) for a, pa in zip(d.atoms, d.probs)),
            Fraction(0),
        )

    signs = (1, -1)
    c2 = math.comb(n, 2)
    single_side = n * z**n + c2 * (q[1] ** n + q[-1] ** n)
    # intersections within one side (rows with rows)
    same = math.comb(n, 2) * z ** (2 * n)  # two zero lines
    same += 2 * n * (n - 1) * z ** (2 * n)  # zero line inside a related pair
    same += n * math.comb(n - 1, 2) * z**n * (q[1] ** n + q[-1] ** n)  # zero line, disjoint pair
    same += c2 * z ** (2 * n)  # same pair with both signs forces zero lines
    same += n * math.comb(n - 1, 2) * sum(t3(a, b) ** n for a in signs for b in signs)  # pairs sharing a line
    if n >= 4:
        disjoint = math.comb(n, 2) * math.comb(n - 2, 2) // 2
        same += disjoint * (q[1] ** n + q[-1] ** n) ** 2
    if sides == "columns":
        return single_side, same
    if sides != "both":
        raise ValueError("sides must be 'both' or 'columns'")
    # intersections across sides (a row event with a column event)
    cross = n * n * z ** (2 * n - 1)
    cross += 2 * n * c2 * z**n * sum(q[s] ** (n - 1) for s in signs)
    cross += c2 * c2 * sum(t4(a, b) * q[a] ** (n - 2) * q[b] ** (n - 2) for a in signs for b in signs)
    return 2 * single_side, 2 * same + cross


def bonferroni_dominant(
    d: DiscreteDist, n: int, depth: int = 2, sides: str = "both"
) -> tuple[Fraction, Fraction]:
    """Bonferroni (lower, upper) bounds on the dominant-union probability.

    The union is split into atomic events (a vanishing line, or a pair of
    lines equal, or a pair of lines negatives of each other). Depth 1 gives
    (largest single event, union bound); depth 2 sharpens the lower bound by
    subtracting every pairwise intersection, evaluated in closed form from the
    independence of entries. ``sides='columns'`` restricts to column events."""
    if n < 1:
        raise ValueError("n must be positive")
    if depth not in (1, 2):
        raise ValueError("depth must be 1 or 2")
    s1, s2 = _pair_terms(d, n, sides)
    z = p0(d)
    singles = [z**n]
    if n >= 2:
        singles += [p2_sq(d) ** n, sum_mass_at(d, +1, 0) ** n]
    lower = max(singles)
    if depth == 2:
        lower = max(lower, s1 - s2)
    upper = min(Fraction(1), s1)
    return min(lower, upper), upper
