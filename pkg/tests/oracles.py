"""Independent reference implementations used only by the tests.

None of these share code with the package: determinants use the Leibniz
permutation expansion, sum laws use itertools over all assignments, and the
inclusion-exclusion terms are computed by brute force over all matrices."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def _perm_sign(p) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def leibniz_det(m) -> Fraction:
    n = len(m)
    total = Fraction(0)
    for p in itertools.permutations(range(n)):
        term = Fraction(_perm_sign(p))
        for i in range(n):
            term *= m[i][p[i]]
            if term == 0:
                break
        total += term
    return total


def all_matrices(atoms, probs, n):
    """Yield (matrix as nested lists, probability) over all k^(n*n) matrices."""
    for idx in itertools.product(range(len(atoms)), repeat=n * n):
        w = Fraction(1)
        for j in idx:
            w *= probs[j]
        yield [[atoms[idx[i * n + c]] for c in range(n)] for i in range(n)], w


def singular_probability(atoms, probs, n) -> Fraction:
    return sum((w for m, w in all_matrices(atoms, probs, n) if leibniz_det(m) == 0), Fraction(0))


def event_probability(atoms, probs, n, pred) -> Fraction:
    return sum((w for m, w in all_matrices(atoms, probs, n) if pred(m)), Fraction(0))


def _lines(m, side):
    n = len(m)
    if side == "row":
        return [tuple(m[i]) for i in range(n)]
    return [tuple(m[i][c] for i in range(n)) for c in range(n)]


def atomic_events(n, sides=("row", "col")):
    """Atomic events as predicates: a vanishing line, and two lines equal or
    negatives of each other."""
    evs = []
    for side in sides:
        for i in range(n):
            evs.append(lambda m, s=side, i=i: all(v == 0 for v in _lines(m, s)[i]))
        for i in range(n):
            for j in range(i + 1, n):
                evs.append(lambda m, s=side, i=i, j=j: _lines(m, s)[i] == _lines(m, s)[j])
                evs.append(
                    lambda m, s=side, i=i, j=j: _lines(m, s)[i] == tuple(-v for v in _lines(m, s)[j])
                )
    return evs


def bonferroni_terms(atoms, probs, n, sides=("row", "col")) -> tuple[Fraction, Fraction, Fraction]:
    """(S1, S2, P[union]) by brute force over all matrices."""
    evs = atomic_events(n, sides)
    s1 = s2 = union = Fraction(0)
    for m, w in all_matrices(atoms, probs, n):
        hit = sum(1 for e in evs if e(m))
        s1 += w * hit
        s2 += w * math.comb(hit, 2)
        if hit:
            union += w
    return s1, s2, union


def sum_law(atoms, probs, x) -> dict:
    """Law of sum b_i x_i by enumerating every assignment."""
    out: dict = {}
    for idx in itertools.product(range(len(atoms)), repeat=len(x)):
        v = sum((atoms[j] * xi for j, xi in zip(idx, x)), Fraction(0))
        w = Fraction(1)
        for j in idx:
            w *= probs[j]
        out[v] = out.get(v, Fraction(0)) + w
    return out


def conditional_law(atoms, probs, x, lower, upper) -> dict:
    """Sum law restricted to assignments whose atom counts lie in the bands,
    renormalised."""
    out: dict = {}
    k = len(atoms)
    for idx in itertools.product(range(k), repeat=len(x)):
        counts = [idx.count(j) for j in range(k)]
        if not all(lo <= c <= hi for c, lo, hi in zip(counts, lower, upper)):
            continue
        v = sum((atoms[j] * xi for j, xi in zip(idx, x)), Fraction(0))
        w = Fraction(1)
        for j in idx:
            w *= probs[j]
        out[v] = out.get(v, Fraction(0)) + w
    total = sum(out.values())
    return {v: w / total for v, w in out.items()}


def window_sup(law: dict, r) -> Fraction:
    """sup_z P[|S - z| <= r] by trying every window whose left end is an atom."""
    vals = sorted(law)
    return max(sum((law[u] for u in vals if v <= u <= v + 2 * r), Fraction(0)) for v in vals)


def singular_values_2x2(m) -> tuple[float, float]:
    """Closed form from the eigenvalues of M^T M."""
    a, b = m[0]
    c, d = m[1]
    tr = a * a + b * b + c * c + d * d
    det = (a * d - b * c) ** 2
    disc = math.sqrt(max(tr * tr - 4 * det, 0.0))
    return math.sqrt((tr + disc) / 2), math.sqrt(max((tr - disc) / 2, 0.0))


def binomial_window(n: int, lo: float, hi: float) -> float:
    """P[lo <= (2B - n)/sqrt(n) <= hi] for B ~ Bin(n, 1/2)."""
    total = 0
    for b in range(n + 1):
        v = (2 * b - n) / math.sqrt(n)
        if lo - 1e-12 <= v <= hi + 1e-12:
            total += math.comb(n, b)
    return total / 2**n


def recursion_direct(f, atoms, X, s, t):
    """E[f(t + sum b_i X_i)] over uniform arrangements of the multiset with
    s_j copies of atom j, by listing every distinct arrangement."""
    items = [a for a, c in zip(atoms, s) for _ in range(c)]
    perms = set(itertools.permutations(items))
    return sum(f(t + sum(b * x for b, x in zip(p, X))) for p in perms) / len(perms)


def gaussian_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
