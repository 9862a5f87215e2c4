"""Averaging machinery over admissible sets.

Given an admissible product set A = A_1 x ... x A_n, a sample X from A and a
count vector s with |s| = ell, the averaged function is

    f_{s,ell}(t) = E[ f(t + sum_{i<=ell} b_i X_i) | #{b_i = a_j} = s_j ],

computed through the convex recursion

    f_{s,ell}(t) = sum_j (s_j / ell) f_{s - e_j, ell-1}(t + a_j X_ell).

Functions live on a uniform grid and are stored as log2 values. Outside its
grid a GridFunction is extended log-linearly with slope +eta on the left and
-eta on the right. For the default test function 2^{-|t|/sqrt(n)} this
extension is exact, and so it is for every average of it on a grid that
covers all shifts, which keeps node values exact whenever the shifts are
multiples of the grid step.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .distribution import DiscreteDist, derived_dists
from .sampler import as_stream, uniform_below

Interval = tuple[int, int]  # inclusive integer interval


class InfeasibleParameters(ValueError):
    pass


class ResourceExceeded(RuntimeError):
    pass


# --- admissible sets -----------------------------------------------------------

@dataclass(frozen=True)
class AdmissibleSpec:
    """Product of integer-interval unions; ``A[i]`` is coordinate i+1."""

    N: int
    n: int
    K1: float
    K2: float
    K3: float
    delta: float
    mode: str
    A: tuple[tuple[Interval, ...], ...]

    def size(self, i: int) -> int:
        return sum(hi - lo + 1 for lo, hi in self.A[i])

    def max_abs(self, i: int) -> int:
        return max(max(abs(lo), abs(hi)) for lo, hi in self.A[i])

    def element(self, i: int, r: int) -> int:
        """The r-th smallest element of A[i]."""
        for lo, hi in sorted(self.A[i]):
            w = hi - lo + 1
            if r < w:
                return lo + r
            r -= w
        raise IndexError("element rank out of range")

    def to_json(self) -> dict:
        return {
            "N": self.N, "n": self.n, "K1": self.K1, "K2": self.K2, "K3": self.K3,
            "delta": self.delta, "mode": self.mode, "A": [[list(iv) for iv in a] for a in self.A],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AdmissibleSpec":
        A = tuple(tuple((int(lo), int(hi)) for lo, hi in a) for a in data["A"])
        return cls(int(data["N"]), int(data["n"]), float(data["K1"]), float(data["K2"]),
                   float(data["K3"]), float(data["delta"]), str(data["mode"]), A)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    clause: str | None = None
    index: int | None = None  # 1-based coordinate
    detail: str = ""


def _is_interval(a: Sequence[Interval]) -> bool:
    return len(a) == 1


def _within(a: Sequence[Interval], lo: float, hi: float) -> bool:
    return all(lo <= x <= hi for iv in a for x in iv)


def validate_admissible(spec: AdmissibleSpec) -> AdmissibilityReport:
    N, n = spec.N, spec.n
    bad = lambda clause, i, detail: AdmissibilityReport(False, clause, i, detail)  # noqa: E731
    if len(spec.A) != n:
        return bad("product structure", None, f"expected {n} factors, got {len(spec.A)}")
    if not (1 < spec.K1 < spec.K2 < spec.K3) or not (0 < spec.delta < 0.25):
        return bad("parameters", None, "need 1 < K1 < K2 < K3 and 0 < delta < 1/4")
    for i, a in enumerate(spec.A):
        ivs = sorted(a)
        if not ivs or any(lo > hi for lo, hi in ivs):
            return bad("product structure", i + 1, "empty or reversed interval")
        if any(ivs[t][1] >= ivs[t + 1][0] for t in range(len(ivs) - 1)):
            return bad("product structure", i + 1, "overlapping intervals")
    log_prod = sum(math.log(spec.size(i)) for i in range(n))
    if log_prod > n * math.log(spec.K3 * N) + 1e-12:
        return bad("cardinality product", None, f"prod |A_i| exceeds (K3 N)^n")
    for i in range(n):
        if spec.max_abs(i) > n * N:
            return bad("max magnitude", i + 1, f"element beyond nN = {n * N}")
    for i in range(n):
        if i + 1 > 2 * spec.delta * n:
            if not _is_interval(spec.A[i]) or spec.size(i) < 2 * N + 1:
                return bad("interval size", i + 1, f"tail factor must be an interval of size >= {2 * N + 1}")
    blocks = int(math.floor(spec.delta * n + 1e-12))
    K1N, K2N = spec.K1 * N, spec.K2 * N
    for b in range(1, blocks + 1):
        even, odd = spec.A[2 * b - 1], spec.A[2 * b - 2]  # A_{2b}, A_{2b-1}
        if spec.mode == "P":
            if not (_is_interval(even) and spec.size(2 * b - 1) >= 2 * N + 1 and _within(even, -K1N, K1N)):
                return bad("P1", 2 * b, "needs an interval of size >= 2N+1 inside [-K1 N, K1 N]")
            pts = sorted(odd)
            sym = sorted((-hi, -lo) for lo, hi in pts) == pts
            if not (len(pts) == 2 and sym and spec.size(2 * b - 2) >= 2 * N
                    and all(min(abs(lo), abs(hi)) > K2N and lo * hi > 0 for lo, hi in pts)):
                return bad("P2", 2 * b - 1, "needs two symmetric intervals of total size >= 2N avoiding [-K2 N, K2 N]")
        elif spec.mode == "Q":
            if not (_is_interval(even) and spec.size(2 * b - 1) >= 2 * N + 1 and _within(even, K1N, K2N)):
                return bad("Q1", 2 * b, "needs an interval of size >= 2N+1 inside [K1 N, K2 N]")
            if not (_is_interval(odd) and spec.size(2 * b - 2) >= 2 * N + 1 and _within(odd, -K2N, -K1N)):
                return bad("Q2", 2 * b - 1, "needs an interval of size >= 2N+1 inside [-K2 N, -K1 N]")
        else:
            return bad("mode", None, f"unknown mode {spec.mode!r}")
    return AdmissibilityReport(True)


def generate_admissible(
    N: int, n: int, K1: float, K2: float, K3: float, delta: float, mode: str, rng, slack: float = 0.25
) -> AdmissibleSpec:
    """Random admissible instance.

    Sizes exceed their minimum by at most ``slack * N`` and are shrunk back to
    the minimum if the cardinality product would break."""
    if mode not in ("P", "Q"):
        raise ValueError("mode must be 'P' or 'Q'")
    s = as_stream(rng)
    blocks = int(math.floor(delta * n + 1e-12))
    if 2 * blocks > n:
        raise InfeasibleParameters("not enough coordinates for the leading blocks")
    K1N, K2N = K1 * N, K2 * N
    extra_cap = int(slack * N)

    def rand(lo: int, hi: int) -> int:  # inclusive
        return lo + uniform_below(s, hi - lo + 1)

    def make(extra: bool) -> list[tuple[Interval, ...]]:
        A: list[tuple[Interval, ...]] = []
        for b in range(1, blocks + 1):
            if mode == "Q":
                lo_b, hi_b = math.ceil(K1N), math.floor(K2N)
                for sign in (-1, 1):  # A_{2b-1} negative, A_{2b} positive
                    avail = hi_b - lo_b + 1
                    if avail < 2 * N + 1:
                        raise InfeasibleParameters("[K1 N, K2 N] holds fewer than 2N+1 integers")
                    size = min(avail, 2 * N + 1 + (rand(0, extra_cap) if extra else 0))
                    start = rand(lo_b, hi_b - size + 1)
                    iv = (start, start + size - 1) if sign > 0 else (-(start + size - 1), -start)
                    A.append((iv,))
            else:
                lo_o = math.floor(K2N) + 1
                width = N + (rand(0, extra_cap) if extra else 0)
                if lo_o + width - 1 > n * N:
                    raise InfeasibleParameters("odd blocks cannot avoid [-K2 N, K2 N] within nN")
                start = rand(lo_o, n * N - width + 1) if extra else lo_o
                A.append(((-(start + width - 1), -start), (start, start + width - 1)))
                half = math.floor(K1N)
                size = min(2 * half + 1, 2 * N + 1 + (rand(0, extra_cap) if extra else 0))
                start = rand(-half, half - size + 1)
                A.append(((start, start + size - 1),))
        for _ in range(2 * blocks, n):
            size = 2 * N + 1 + (rand(0, extra_cap) if extra else 0)
            off = rand(-N, N) if extra else 0
            lo = max(-n * N, min(off - size // 2, n * N - size + 1))
            A.append(((lo, lo + size - 1),))
        return A

    for extra in (True, False):
        spec = AdmissibleSpec(N, n, K1, K2, K3, delta, mode, tuple(make(extra)))
        rep = validate_admissible(spec)
        if rep.ok:
            return spec
        if rep.clause != "cardinality product":
            raise InfeasibleParameters(f"construction violates {rep.clause}: {rep.detail}")
    raise InfeasibleParameters("cardinality product bound fails even with minimal factors")


def sample_point(spec: AdmissibleSpec, rng) -> np.ndarray:
    """X uniform on A (independent uniform coordinates)."""
    s = as_stream(rng)
    return np.array([spec.element(i, uniform_below(s, spec.size(i))) for i in range(spec.n)], dtype=np.int64)


# --- grid functions -----------------------------------------------------------------

@dataclass
class GridFunction:
    origin: float
    step: float
    log2v: np.ndarray
    lipschitz: float

    @property
    def size(self) -> int:
        return self.log2v.shape[0]

    @property
    def end(self) -> float:
        return self.origin + self.step * (self.size - 1)

    def nodes(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.size)

    def log2_at_index(self, pos: np.ndarray) -> np.ndarray:
        """log2 f at fractional node positions, log-linear between nodes and
        beyond the ends."""
        pos = np.asarray(pos, dtype=np.float64)
        last = self.size - 1
        eh = self.lipschitz * self.step
        inner = np.clip(pos, 0, last)
        i0 = np.floor(inner).astype(np.int64)
        i1 = np.minimum(i0 + 1, last)
        frac = inner - i0
        v = self.log2v[i0] * (1 - frac) + self.log2v[i1] * frac
        v = np.where(pos < 0, self.log2v[0] + eh * pos, v)
        v = np.where(pos > last, self.log2v[last] - eh * (pos - last), v)
        return v

    def log2_at(self, t) -> np.ndarray:
        return self.log2_at_index((np.asarray(t, dtype=np.float64) - self.origin) / self.step)

    def values(self) -> np.ndarray:
        return np.exp2(self.log2v)

    def mass(self) -> float:
        """Riemann sum over the infinite grid, with geometric tails."""
        h = self.step
        r = 2.0 ** (-self.lipschitz * h)
        tail = r / (1 - r) if r < 1 else math.inf
        m = self.log2v.max()
        body = np.exp2(self.log2v - m).sum() + tail * (np.exp2(self.log2v[0] - m) + np.exp2(self.log2v[-1] - m))
        return float(h * body * 2.0**m)

    def sup(self) -> float:
        return float(np.exp2(self.log2v.max()))

    def lipschitz_excess(self) -> float:
        """max over adjacent nodes of |Δ log2 f| - eta*h (<= 0 when Lipschitz)."""
        if self.size < 2:
            return -math.inf
        return float(np.abs(np.diff(self.log2v)).max() - self.lipschitz * self.step)

    def window_mass(self, a: float, b: float) -> float:
        """h * sum of f over nodes in [a, b], the grid counterpart of the
        integral over [a, b]; nodes may lie beyond the stored range."""
        h = self.step
        ia = math.ceil((a - self.origin) / h - 1e-9)
        ib = math.floor((b - self.origin) / h + 1e-9)
        if ib < ia:
            return 0.0
        return float(h * np.exp2(self.log2_at_index(np.arange(ia, ib + 1, dtype=np.float64))).sum())


def choose_step(d: DiscreteDist, eta: float, eta_step: float = 1e-3) -> float:
    """Grid step 1/q with q a multiple of the atoms' common denominator (so
    integer multiples of every atom are grid shifts) and eta/q <= eta_step."""
    D = d.integer_scale()
    q = D * max(1, math.ceil(eta / (eta_step * D)))
    return 1.0 / q


def default_test_function(n: int, step: float, half_width: int = 1) -> GridFunction:
    """f(t) = 2^{-|t|/sqrt(n)} / iota on nodes -half_width*h .. half_width*h.

    iota is the Riemann sum over the infinite grid, so mass() is 1."""
    eta = 1.0 / math.sqrt(n)
    r = 2.0 ** (-eta * step)
    iota = step * (1 + 2 * r / (1 - r))
    nodes = step * np.arange(-half_width, half_width + 1)
    return GridFunction(float(nodes[0]), step, -eta * np.abs(nodes) - math.log2(iota), eta)


# --- the averaging recursion ----------------------------------------------------------

@dataclass
class Recursion:
    dist: DiscreteDist
    spec: AdmissibleSpec | None
    X: np.ndarray
    s: tuple[int, ...]
    ell: int
    origin: float
    step: float
    lipschitz: float
    levels: list[dict[tuple[int, ...], np.ndarray]] = field(default_factory=list)
    top: GridFunction | None = None

    def function(self, counts: Sequence[int]) -> GridFunction:
        counts = tuple(counts)
        lvl = self.levels[sum(counts)]
        if counts not in lvl:
            raise KeyError(f"count vector {counts} not stored")
        return GridFunction(self.origin, self.step, lvl[counts], self.lipschitz)


def _reachable(s: Sequence[int], j: int) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix: list[int], left: int, pos: int):
        if pos == len(s) - 1:
            if left <= s[pos]:
                out.append(tuple(prefix + [left]))
            return
        for c in range(min(left, s[pos]) + 1):
            rec(prefix + [c], left - c, pos + 1)

    rec([], j, 0)
    return out


def run_recursion(
    f: GridFunction,
    d: DiscreteDist,
    X: Sequence[int],
    s: Sequence[int],
    ell: int | None = None,
    spec: AdmissibleSpec | None = None,
    keep_levels: bool = True,
    budget: int = 1 << 27,
) -> Recursion:
    s = tuple(int(c) for c in s)
    if len(s) != d.k or any(c < 0 for c in s):
        raise ValueError("count vector must have one nonnegative entry per atom")
    ell = sum(s) if ell is None else ell
    if sum(s) != ell:
        raise ValueError("count vector must sum to ell")
    X = np.asarray(X, dtype=np.int64)
    if ell > X.shape[0]:
        raise ValueError("ell exceeds the number of sampled coordinates")
    if spec is not None and X.shape[0] != spec.n:
        raise ValueError("X does not match the admissible spec")
    atoms = [float(a) for a in d.atoms]
    h = f.step
    up = sum(max(0.0, max(a * x for a in atoms)) for x in X[:ell].tolist())
    down = sum(min(0.0, min(a * x for a in atoms)) for x in X[:ell].tolist())
    lo_idx = math.floor((f.origin - up) / h + 1e-9)
    hi_idx = math.ceil((f.end - down) / h - 1e-9)
    size = hi_idx - lo_idx + 1
    stored = math.prod(c + 1 for c in s) if keep_levels else 2 * max(len(_reachable(s, j)) for j in range(ell + 1))
    if stored * size > budget:
        raise ResourceExceeded(f"{stored} grid functions of {size} nodes exceed budget {budget}")
    origin = lo_idx * h
    base = np.arange(size, dtype=np.float64)
    # f sampled on the common grid
    level0 = f.log2_at_index(base + (origin - f.origin) / h)
    rec = Recursion(d, spec, X, s, ell, origin, h, f.lipschitz)
    prev = {(0,) * d.k: level0}
    if keep_levels:
        rec.levels.append(prev)
    tmp = GridFunction(origin, h, level0, f.lipschitz)
    for j in range(1, ell + 1):
        xj = float(X[j - 1])
        cur: dict[tuple[int, ...], np.ndarray] = {}
        for W in _reachable(s, j):
            terms = []
            top = None
            for i, c in enumerate(W):
                if c == 0:
                    continue  # zero coefficient: child never touched
                child = W[:i] + (c - 1,) + W[i + 1 :]
                tmp.log2v = prev[child]
                shifted = tmp.log2_at_index(base + atoms[i] * xj / h)
                top = shifted if top is None else np.maximum(top, shifted)
                terms.append(math.log2(c / j) + shifted)
            m = np.max(terms, axis=0)
            acc = np.zeros(size)
            for t in terms:
                acc += np.exp2(t - m)
            # a convex combination never exceeds its largest child
            cur[W] = np.minimum(top, m + np.log2(acc))
        prev = cur
        if keep_levels:
            rec.levels.append(cur)
    rec.top = GridFunction(origin, h, prev[s], f.lipschitz)
    return rec


def average(f: GridFunction, spec: AdmissibleSpec, X: Sequence[int], s: Sequence[int], ell: int,
            d: DiscreteDist, budget: int = 1 << 27) -> GridFunction:
    """f_{A,s,ell} as a GridFunction (levels are not retained)."""
    return run_recursion(f, d, X, s, ell, spec, keep_levels=False, budget=budget).top


# --- step records ---------------------------------------------------------------------

@dataclass(frozen=True)
class StepRecordTrace:
    t: tuple[float, ...]  # t_0 .. t_ell
    w: tuple[int, ...]  # w_1 .. w_ell, 0-based atom indices
    h: tuple[float, ...]  # h_0 .. h_ell
    robust: tuple[bool, ...]  # steps 1 .. ell
    drop: tuple[bool, ...]
    identity_error: float  # worst relative gap in the convex identities along the path


def extract_step_record(rec: Recursion, t: float, lam: float, R: float, N: int | None = None) -> StepRecordTrace:
    if not rec.levels:
        raise ValueError("recursion levels were not retained")
    top = rec.function(rec.s)
    if not (top.origin - 1e-9 <= t <= top.end + 1e-9):
        raise ValueError("t lies outside the grid")
    if N is None:
        if rec.spec is None:
            raise ValueError("N is required when the recursion has no admissible spec")
        N = rec.spec.N
    n = rec.spec.n if rec.spec is not None else rec.X.shape[0]
    cutoff = R / (N * math.sqrt(n))
    atoms = [float(a) for a in rec.dist.atoms]
    diffs = [float(z) for z in derived_dists(rec.dist).diff.atoms if z != 0]
    W = list(rec.s)
    ti = float(t)
    hi_log = float(top.log2_at(ti))
    ts, ws, hs, robust, drop = [ti], [], [hs0 := hi_log], [], []
    worst = 0.0
    for i in range(rec.ell, 0, -1):
        xi = float(rec.X[i - 1])
        kids = {}
        for j, c in enumerate(W):
            if c == 0:
                continue
            child = tuple(W[:j] + [c - 1] + W[j + 1 :])
            kids[j] = float(rec.function(child).log2_at(ti + atoms[j] * xi))
        combo = sum((W[j] / i) * 2.0 ** v for j, v in kids.items())
        worst = max(worst, abs(combo - 2.0**hi_log) / max(combo, 1e-300))
        choice = next((j for j in sorted(kids) if kids[j] >= hi_log), None)
        if choice is None:
            choice = max(kids, key=lambda j: (kids[j], -j))
        robust.append(lam < W[choice] / i < 1 - lam)
        t_next = ti + atoms[choice] * xi
        dropped = True
        for j, c in enumerate(W):
            if c == 0:
                continue
            child = rec.function(tuple(W[:j] + [c - 1] + W[j + 1 :]))
            for z in diffs:
                if 2.0 ** float(child.log2_at(t_next + z * xi)) > cutoff:
                    dropped = False
                    break
            if not dropped:
                break
        drop.append(dropped)
        ws.append(choice)
        hi_log = kids[choice]
        W[choice] -= 1
        ti = t_next
        ts.append(ti)
        hs.append(hi_log)
    # collected from level ell down to 0; report in increasing level order
    return StepRecordTrace(
        t=tuple(reversed(ts)),
        w=tuple(reversed(ws)),
        h=tuple(2.0**v for v in reversed(hs)),
        robust=tuple(reversed(robust)),
        drop=tuple(reversed(drop)),
        identity_error=worst,
    )


# --- window-mass consistency ----------------------------------------------------------

@dataclass(frozen=True)
class WindowCheck:
    grid_mass: float  # h * sum of f_{A,s,ell} over nodes of J
    levy_bound: float  # conditional concentration of sum b_i X_i at radius |J|
    identity_error: float  # max relative gap between node values and sum_S mu(S) f(t + S)


def window_check(rec: Recursion, start: float, length: float, probe: int = 16) -> WindowCheck:
    """Compare the mass of f_{A,s,ell} on J = [start, start + length] with the
    conditional concentration function of sum b_i X_i (counts fixed to s).

    Both come from the same measure mu, the conditional law of the shift S:
    node values must equal sum_S mu(S) f(t + S), which is checked on ``probe``
    nodes spread over J."""
    from .levy import SliceConstraint, conditional_sum_dist, levy

    g = rec.top if rec.top is not None else rec.function(rec.s)
    xs = [int(v) for v in rec.X[: rec.ell]]
    law, _ = conditional_sum_dist(rec.dist, xs, SliceConstraint.exact_counts(rec.s))
    bound = float(levy(law, Fraction(length).limit_denominator(10**9)))
    mass = g.window_mass(start, start + length)
    f0 = GridFunction(rec.origin, rec.step, rec.levels[0][(0,) * rec.dist.k], rec.lipschitz) if rec.levels else None
    err = 0.0
    if f0 is not None:
        shifts = np.array([float(v) for v in law.values])
        mu = np.array([float(m) for m in law.masses])
        for t in np.linspace(start, start + length, probe):
            t = rec.origin + rec.step * round((t - rec.origin) / rec.step)
            direct = float(mu @ np.exp2(f0.log2_at(t + shifts)))
            val = float(np.exp2(g.log2_at(t)))
            err = max(err, abs(val - direct) / direct)
    return WindowCheck(mass, bound, err)


# --- inversion experiment -----------------------------------------------------------

@dataclass(frozen=True)
class ExceedanceCurve:
    L: tuple[float, ...]
    exceedance: tuple[float, ...]
    stderr: tuple[float, ...]
    normalized_sup: tuple[float, ...]  # N sqrt(n) ||f||_inf per trial


def inversion_experiment(
    d: DiscreteDist,
    N: int,
    n: int,
    m: Sequence[int],
    trials: int,
    L_grid: Sequence[float],
    rng,
    K: tuple[float, float, float] = (2.0, 4.0, 8.0),
    delta: float = 0.1,
    mode: str = "Q",
    eta_step: float = 1e-3,
    budget: int = 1 << 27,
) -> ExceedanceCurve:
    """Empirical P[||f_{A,m,n}||_inf >= L / (N sqrt n)] over random (A, X)."""
    if sum(m) != n:
        raise ValueError("m must sum to n")
    s = as_stream(rng)
    eta = 1.0 / math.sqrt(n)
    step = choose_step(d, eta, eta_step)
    f = default_test_function(n, step)
    sups = []
    for _ in range(trials):
        spec = generate_admissible(N, n, *K, delta, mode, s)
        X = sample_point(spec, s)
        g = average(f, spec, X, m, n, d, budget)
        sups.append(g.sup() * N * math.sqrt(n))
    arr = np.array(sups)
    Ls = [float(v) for v in L_grid]
    exc = [float(np.mean(arr >= L)) for L in Ls]
    err = [math.sqrt(p * (1 - p) / trials) for p in exc]
    return ExceedanceCurve(tuple(Ls), tuple(exc), tuple(err), tuple(float(v) for v in arr))
