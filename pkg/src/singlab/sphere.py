"""Structured classes on the unit sphere: almost-constant vectors,
elementary vectors, non-constant witnesses, and randomized rounding."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import DiscreteDist
from .sampler import as_stream

UNIT_TOL = 1e-10
_EPS = 1e-12


def _unit(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty vector")
    if abs(float(v @ v) - 1.0) > UNIT_TOL:
        raise ValueError("x must be a unit vector")
    return v


@dataclass(frozen=True)
class ConsParams:
    delta: float
    rho: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class ConsWitness:
    lam: float
    covered: tuple[int, ...]


def cons_membership(x, p: ConsParams) -> ConsWitness | None:
    """Witness that at least (1 - delta) n coordinates lie within rho/sqrt(n)
    of a common value, or None."""
    v = _unit(x)
    n = v.size
    order = np.argsort(v, kind="stable")
    s = v[order]
    width = 2.0 * p.rho / math.sqrt(n)
    best, best_i, best_j = 0, 0, 0
    j = 0
    for i in range(n):
        j = max(j, i)
        while j + 1 < n and s[j + 1] - s[i] <= width + _EPS:
            j += 1
        if j - i + 1 > best:
            best, best_i, best_j = j - i + 1, i, j
    if best < (1.0 - p.delta) * n - 1e-9:
        return None
    lam = 0.5 * (s[best_i] + s[best_j])
    return ConsWitness(float(lam), tuple(sorted(int(t) for t in order[best_i : best_j + 1])))


@dataclass(frozen=True)
class ElemClass:
    """kind is 'Elem_i', 'Elem_ij' or 'ElemPlus_ij'; indices are 0-based.

    ``sign`` is -1 when the match is for -x rather than x (the concentration
    function cannot tell x from -x)."""

    kind: str
    i: int
    j: int | None
    sign: int
    distance: float


_KIND_ORDER = {"Elem_i": 0, "Elem_ij": 1, "ElemPlus_ij": 2}


def elem_classify(x, delta_prime: float, signed: bool = True) -> ElemClass | None:
    """Nearest elementary centre within delta_prime.

    Centres are e_i, (e_i - e_j)/sqrt(2) and (e_i + e_j)/sqrt(2). Only the two
    largest-magnitude coordinates are searched. With ``signed`` the centres'
    negatives are also accepted. Ties prefer the unsigned match, then the
    smallest i, then j, then the class order above."""
    v = _unit(x)
    n = v.size
    top = np.argsort(-np.abs(v), kind="stable")[:2]
    r2 = 1 / math.sqrt(2)
    cands = []
    for sg in ((1, -1) if signed else (1,)):
        w = sg * v
        for i in top:
            i = int(i)
            d2 = float(w @ w) - 2 * w[i] + 1
            cands.append((d2, i, -1, 0, sg))
        if n >= 2:
            a, b = int(top[0]), int(top[1])
            for i, j in ((a, b), (b, a)):
                d2 = float(w @ w) - 2 * r2 * (w[i] - w[j]) + 1
                cands.append((d2, i, j, 1, sg))
            i, j = min(a, b), max(a, b)
            d2 = float(w @ w) - 2 * r2 * (w[i] + w[j]) + 1
            cands.append((d2, i, j, 2, sg))
    ok = [c for c in cands if c[0] <= delta_prime**2 + 1e-15]
    if not ok:
        return None
    d2, i, j, kind, sg = min(ok, key=lambda c: (c[0], -c[4], c[1], c[2], c[3]))
    name = ("Elem_i", "Elem_ij", "ElemPlus_ij")[kind]
    return ElemClass(name, i, None if j < 0 else j, sg, math.sqrt(max(d2, 0.0)))


@dataclass(frozen=True)
class NonconsWitness:
    case: int
    kappa: float
    kappa_prime: float
    nu: float
    nu_prime: float
    group_a: tuple[int, ...]
    group_b: tuple[int, ...]


class WitnessNotFound(RuntimeError):
    pass


def _case1(u: np.ndarray, m: int):
    # u = sqrt(n)|x| ; group A: u <= kappa, group B: kappa + nu' < u <= kappa'
    n = u.size
    order = np.argsort(u, kind="stable")
    s = u[order]
    if 2 * m > n:
        return None
    low = s[m - 1]
    high = s[n - m]
    if high <= low:
        return None
    kappa = low if low > 0 else 0.5 * high
    if kappa >= high:
        return None
    nu_p = 0.5 * (high - kappa)
    kappa_p = float(s[-1])
    a = tuple(sorted(int(t) for t in np.flatnonzero(u <= kappa)))
    b = tuple(sorted(int(t) for t in np.flatnonzero((u > kappa + nu_p) & (u <= kappa_p))))
    if len(a) < m or len(b) < m:
        return None
    return float(kappa), kappa_p, float(nu_p), a, b


def _case2(w: np.ndarray, m: int):
    # w = sqrt(n) x ; group A: kappa < w < kappa', group B: -kappa' < w < -kappa
    pos = np.sort(w[w > 0])[::-1]
    neg = np.sort(-w[w < 0])[::-1]
    if pos.size < m or neg.size < m:
        return None
    kappa = 0.5 * min(pos[m - 1], neg[m - 1])
    kappa_p = 2.0 * max(pos[0], neg[0])
    a = tuple(sorted(int(t) for t in np.flatnonzero((w > kappa) & (w < kappa_p))))
    b = tuple(sorted(int(t) for t in np.flatnonzero((w < -kappa) & (w > -kappa_p))))
    return float(kappa), float(kappa_p), a, b


def noncons_witness(x, p: ConsParams, nu_step: float = 0.01) -> NonconsWitness:
    """Realised parameters for one of the two conclusions available to a
    vector outside Cons(delta, rho).

    Case 1: >= nu n coordinates with |x_i| <= kappa/sqrt(n) and >= nu n with
    (kappa + nu')/sqrt(n) < |x_i| <= kappa'/sqrt(n).
    Case 2: >= nu n coordinates in (kappa, kappa')/sqrt(n) and >= nu n in
    (-kappa', -kappa)/sqrt(n).
    nu is scanned downward from 1/2 on a lattice of step ``nu_step``."""
    v = _unit(x)
    if cons_membership(v, p) is not None:
        raise ValueError("x lies in Cons(delta, rho); no non-constant witness applies")
    n = v.size
    w = math.sqrt(n) * v
    u = np.abs(w)
    steps = int(round(0.5 / nu_step))
    for t in range(steps, 0, -1):
        nu = t * nu_step
        m = max(1, math.ceil(nu * n - 1e-9))
        r = _case1(u, m)
        if r is not None:
            kappa, kappa_p, nu_p, a, b = r
            return NonconsWitness(1, kappa, kappa_p, nu, nu_p, a, b)
        r = _case2(w, m)
        if r is not None:
            kappa, kappa_p, a, b = r
            return NonconsWitness(2, kappa, kappa_p, nu, 0.0, a, b)
    raise WitnessNotFound(f"no witness on the nu lattice with step {nu_step}")


class RoundingFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class RoundResult:
    y_round: np.ndarray
    retries: int


def randomized_round(y, lam: float, mu: float, d_delta: DiscreteDist, trials: int, rng) -> RoundResult:
    """Round each y_i to floor or ceil, up with probability frac(y_i), until
    |sum y - sum y'| <= C sqrt(n) with C = 2 + max|supp d_delta|.

    ``lam`` and ``mu`` describe the caller's concentration hypothesis and are
    not re-verified."""
    del lam, mu
    yv = np.asarray(y, dtype=np.float64)
    n = yv.size
    C = 2.0 + max(abs(float(a)) for a in d_delta.atoms)
    lo = np.floor(yv)
    frac = yv - lo
    s = as_stream(rng)
    target = float(yv.sum())
    for attempt in range(trials):
        u = s.u64(n).astype(np.float64) * 2.0**-64
        yr = lo + (u < frac)
        if abs(target - float(yr.sum())) <= C * math.sqrt(n):
            return RoundResult(yr.astype(np.int64), attempt)
    raise RoundingFailed(f"sum condition not met in {trials} trials")
