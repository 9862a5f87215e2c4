"""Desk-scale reproductions: Monte Carlo singularity, smallest singular value
tails, compressible infima, the structure dichotomy for kernel vectors, and
anticoncentration sweeps."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels as K
from .distribution import DiscreteDist, p0, p2_sq, p_inf, parse_dist, predicted_probabilities
from .exact import bonferroni_dominant
from .levy import levy, levy_mc, sum_dist
from .sampler import RngSeed, as_stream, cdf_thresholds, sample_matrix
from .spectral import kernel_vector
from .sphere import ConsParams, cons_membership, elem_classify


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Every free parameter of the experiments, with defaults.

    ``epsilon``, ``L`` and the fitted constants are rate parameters that the
    theory leaves unspecified; they are inputs here, never asserted."""

    dist: str = "ber:1/2"
    n: int = 10
    samples: int = 100_000
    t_grid: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    epsilon: float = 0.05
    L: float = 4.0
    delta: float = 0.1
    rho: float = 1.0
    delta_prime: float = 0.1
    theta: float = 1e-3
    r0: float = 1e-2
    tau0: float = 5e-2
    trials: int = 100
    levy_samples: int = 1_000_000
    sweep_mode: str = "prop51"
    net_profiles: int = 64
    net_budget: int = 100_000
    N: int = 64
    m: list[int] | None = None
    L_grid: list[float] = field(default_factory=lambda: [0.0, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0, 1.5])
    L0: float = 0.6  # fixed level for comparing exceedance across n
    K: list[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])
    adm_delta: float = 0.1
    adm_mode: str = "Q"
    eta_step: float = 1.0
    lam: float = 0.1
    R: float = 1.0
    budget: int = 1 << 28
    chunk: int = 1 << 16
    rtol: float = 1e-6
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        pos_int = ("n", "samples", "trials", "levy_samples", "net_profiles", "net_budget", "N", "budget", "chunk", "workers")
        for name in pos_int:
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer")
        pos_real = ("epsilon", "L", "delta", "rho", "delta_prime", "theta", "r0", "tau0", "eta_step", "R", "rtol", "L0")
        for name in pos_real:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{name} must be positive")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if list(self.t_grid) != sorted(self.t_grid) or any(t < 0 for t in self.t_grid):
            raise ConfigError("t_grid must be sorted and nonnegative")
        if list(self.L_grid) != sorted(self.L_grid):
            raise ConfigError("L_grid must be sorted")
        if self.sweep_mode not in ("prop51", "lemma41"):
            raise ConfigError("sweep_mode must be 'prop51' or 'lemma41'")
        if self.adm_mode not in ("P", "Q"):
            raise ConfigError("adm_mode must be 'P' or 'Q'")
        if len(self.K) != 3:
            raise ConfigError("K must list K1, K2, K3")
        if not 0 < self.lam < 0.5:
            raise ConfigError("lam must lie in (0, 1/2)")
        try:
            parse_dist(self.dist)
        except Exception as exc:  # noqa: BLE001
            raise ConfigError(f"bad distribution: {exc}") from exc

    def distribution(self) -> DiscreteDist:
        return parse_dist(self.dist)

    def rng(self, stream: int = 0) -> RngSeed:
        return RngSeed(self.seed, stream)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def merged(self, overrides: dict) -> "ExperimentConfig":
        data = self.to_json()
        for key, v in overrides.items():
            if v is not None:
                data[key] = v
        return ExperimentConfig.from_dict(data)


def _set_threads(workers: int) -> int:
    import numba

    w = max(1, min(workers, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(w)
    return w


def _kernel_inputs(d: DiscreteDist, n: int):
    ints = np.array([float(v) for v in d.integer_atoms()])
    need = K.primes_needed(n, int(max(abs(v) for v in ints)))
    return cdf_thresholds(d), ints, need


# --- Monte Carlo singularity ----------------------------------------------------------

@dataclass(frozen=True)
class MCResult:
    estimate: float
    stderr: float
    ratio_to_conjecture: float
    hits: int
    samples: int
    conjecture: float
    primes_needed: int
    workers: int
    seconds: float


def mc_singularity(cfg: ExperimentConfig) -> MCResult:
    """Fraction of exactly singular matrices among cfg.samples draws.

    Matrix s of the run uses stream counters s*n^2 .. (s+1)*n^2 - 1, so the
    estimate depends on (seed, n, samples) only."""
    d = cfg.distribution()
    n = cfg.n
    t0 = time.perf_counter()
    w = _set_threads(cfg.workers)
    th, ints, need = _kernel_inputs(d, n)
    st = as_stream(cfg.rng(0))
    hits = 0
    for lo in range(0, cfg.samples, cfg.chunk * 16):
        cnt = min(cfg.chunk * 16, cfg.samples - lo)
        hits += int(K.count_singular(st.k1, st.k2, n, lo, cnt, th, ints, K.PRIMES, need, max(w, 1)))
    p = hits / cfg.samples
    se = math.sqrt(p * (1 - p) / cfg.samples)
    conj = float(predicted_probabilities(d, n).conjecture)
    ratio = p / conj if conj > 0 else math.nan
    return MCResult(p, se, ratio, hits, cfg.samples, conj, need, w, time.perf_counter() - t0)


@dataclass(frozen=True)
class UnionCheck:
    union_hits: int
    singular_hits: int
    violations: int
    samples: int


def union_check(cfg: ExperimentConfig) -> UnionCheck:
    """Per-sample comparison of the dominant union against exact singularity
    on the same matrices as mc_singularity."""
    d = cfg.distribution()
    w = _set_threads(cfg.workers)
    th, ints, need = _kernel_inputs(d, cfg.n)
    st = as_stream(cfg.rng(0))
    u = z = v = 0
    for lo in range(0, cfg.samples, cfg.chunk * 16):
        cnt = min(cfg.chunk * 16, cfg.samples - lo)
        a, b, c = K.union_vs_singular(st.k1, st.k2, cfg.n, lo, cnt, th, ints, K.PRIMES, need, max(w, 1))
        u, z, v = u + int(a), z + int(b), v + int(c)
    return UnionCheck(u, z, v, cfg.samples)


# --- smallest singular value tails -------------------------------------------------------

@dataclass(frozen=True)
class TailRow:
    t: float
    p_hat: float
    stderr: float
    predicted: float


@dataclass(frozen=True)
class TailCurve:
    rows: tuple[TailRow, ...]
    C_fit: float
    base: float  # 2n P[E_{e_1}]
    weak_bound_floor: float  # (||p||_inf + epsilon)^n
    samples: int

    def slopes(self) -> dict[float, float]:
        """(tail(t) - tail(0)) / t for t > 0, using the t = 0 row."""
        zero = next((r.p_hat for r in self.rows if r.t == 0), None)
        if zero is None:
            raise ValueError("curve has no t = 0 row")
        return {r.t: (r.p_hat - zero) / r.t for r in self.rows if r.t > 0}


def smallest_singular_batch(d: DiscreteDist, n: int, rng, start: int, count: int) -> np.ndarray:
    """s_n for samples start .. start+count-1 of the counter stream; exactly
    singular matrices get 0."""
    th, ints, need = _kernel_inputs(d, n)
    st = as_stream(rng)
    mats, flags = K.matrices_with_flags(st.k1, st.k2, n, start, count, th, ints, K.PRIMES, need)
    mats /= d.integer_scale()
    s = np.linalg.svd(mats, compute_uv=False)[:, -1]
    s[flags] = 0.0
    return s


def tail_curve(cfg: ExperimentConfig) -> TailCurve:
    d = cfg.distribution()
    n = cfg.n
    if any(t > 2 for t in cfg.t_grid):
        raise ConfigError("t_grid must lie in [0, 2]")
    _set_threads(cfg.workers)
    ts = np.array(cfg.t_grid, dtype=np.float64)
    counts = np.zeros(ts.size, dtype=np.int64)
    for lo in range(0, cfg.samples, cfg.chunk):
        cnt = min(cfg.chunk, cfg.samples - lo)
        s = smallest_singular_batch(d, n, cfg.rng(0), lo, cnt) * math.sqrt(n)
        # nested events {s_n sqrt(n) <= t} on the same samples
        counts += (s[None, :] <= ts[:, None]).sum(axis=1)
    p = counts / cfg.samples
    se = np.sqrt(p * (1 - p) / cfg.samples)
    base = float(2 * n * p0(d) ** n)
    pos = ts > 0
    C = float(np.sum(ts[pos] * (p[pos] - base)) / np.sum(ts[pos] ** 2)) if pos.any() else 0.0
    rows = tuple(TailRow(float(t), float(q), float(e), C * float(t) + base) for t, q, e in zip(ts, p, se))
    weak = float(p_inf(d)) + cfg.epsilon
    return TailCurve(rows, C, base, weak**n, cfg.samples)


# --- compressible infima ----------------------------------------------------------------

@dataclass(frozen=True)
class CompressibleResult:
    t: float
    frequency: float
    stderr: float
    hits: int
    samples: int
    net_size: int
    elementary_frequency: float
    predicted_factor: float  # t + P[E_{e1-e2}]
    eta_fit: float | None
    bonferroni: tuple[float, float]


def _cons_profiles(n: int, count: int, delta: float, rho: float, rng) -> np.ndarray:
    """Almost-constant unit vectors: a constant level plus offsets of size at
    most rho/sqrt(n) on most coordinates and free values on floor(delta n)."""
    st = as_stream(rng)
    free = int(math.floor(delta * n))
    out = np.empty((count, n))
    levels = 8
    for c in range(count):
        u = st.u64(3 * n).astype(np.float64) * 2.0**-64
        lam = 1.0 / math.sqrt(n)
        offs = (np.floor(u[:n] * (2 * levels + 1)) - levels) / levels * rho / math.sqrt(n) * 0.5
        x = lam + offs
        if free:
            idx = np.argsort(u[n : 2 * n])[:free]
            x[idx] = (np.floor(u[2 * n : 2 * n + free] * (2 * levels + 1)) - levels) / levels
        out[c] = x / np.linalg.norm(x)
    return out


def compressible_trial(cfg: ExperimentConfig, t: float | None = None, centres: str = "all") -> CompressibleResult:
    """Monte Carlo frequency of inf over a finite Cons net of |Mx| <= t.

    The net is the elementary centres e_i, (e_i - e_j)/sqrt 2, (e_i + e_j)/sqrt 2
    plus ``cfg.net_profiles`` quantised almost-constant profiles. With
    ``centres='e1'`` only e_1 is used."""
    d = cfg.distribution()
    n = cfg.n
    t = cfg.t_grid[0] if t is None else float(t)
    if centres not in ("all", "elementary", "e1"):
        raise ConfigError("centres must be 'all', 'elementary' or 'e1'")
    n_elem = n + n * (n - 1) if centres != "e1" else 1
    profiles = _cons_profiles(n, cfg.net_profiles, cfg.delta, cfg.rho, cfg.rng(1)) if centres == "all" else np.empty((0, n))
    net_size = n_elem + profiles.shape[0]
    if net_size > cfg.net_budget:
        raise ConfigError(f"net of {net_size} points exceeds budget {cfg.net_budget}")
    _set_threads(cfg.workers)
    th, ints, need = _kernel_inputs(d, n)
    st = as_stream(cfg.rng(0))
    scale = d.integer_scale()
    hits = elem_hits = 0
    iu = np.triu_indices(n, 1)
    tol = 1e-9
    for lo in range(0, cfg.samples, cfg.chunk):
        cnt = min(cfg.chunk, cfg.samples - lo)
        mats, _ = K.matrices_with_flags(st.k1, st.k2, n, lo, cnt, th, ints, K.PRIMES, 1)
        # squared norms in integer units stay exact in double precision
        if centres == "e1":
            best = np.einsum("bi,bi->b", mats[:, :, 0], mats[:, :, 0])
        else:
            G = np.einsum("bki,bkj->bij", mats, mats)
            diag = np.einsum("bii->bi", G)
            pair_minus = (diag[:, iu[0]] + diag[:, iu[1]] - 2 * G[:, iu[0], iu[1]]) / 2
            pair_plus = (diag[:, iu[0]] + diag[:, iu[1]] + 2 * G[:, iu[0], iu[1]]) / 2
            best = np.minimum(diag.min(axis=1), np.minimum(pair_minus.min(axis=1), pair_plus.min(axis=1)))
        elem_ok = np.sqrt(best) / scale <= t + tol
        elem_hits += int(elem_ok.sum())
        ok = elem_ok
        if profiles.shape[0]:
            norms = np.linalg.norm(mats @ profiles.T, axis=1).min(axis=1) / scale
            ok = ok | (norms <= t + tol)
        hits += int(ok.sum())
    freq = hits / cfg.samples
    se = math.sqrt(freq * (1 - freq) / cfg.samples)
    factor = t + float(predicted_probabilities(d, n).pE1minus)
    eta = -math.log(freq / factor) / n if 0 < freq and factor > 0 else None
    lo_b, hi_b = bonferroni_dominant(d, n, 2, sides="columns")
    return CompressibleResult(
        t, freq, se, hits, cfg.samples, net_size, elem_hits / cfg.samples, factor, eta, (float(lo_b), float(hi_b))
    )


# --- structure dichotomy for kernel vectors -----------------------------------------------

@dataclass(frozen=True)
class DichotomyTrial:
    trial: int
    cons: bool
    levy_estimate: float
    levy_stderr: float
    label: str  # "cons", "small_threshold" or "neither"


@dataclass(frozen=True)
class DichotomyResult:
    frac_cons: float
    frac_small_threshold: float
    frac_neither: float
    r0: float
    tau0: float
    trials: tuple[DichotomyTrial, ...]


def _classify_kernel(d, v, params, cfg, stream_id, index) -> DichotomyTrial:
    if cons_membership(v, params) is not None:
        return DichotomyTrial(index, True, math.nan, math.nan, "cons")
    est = levy_mc(d, v, cfg.r0, cfg.levy_samples, cfg.rng(stream_id), workers=cfg.workers)
    label = "small_threshold" if est.estimate <= cfg.tau0 else "neither"
    return DichotomyTrial(index, False, est.estimate, est.stderr, label)


def structure_dichotomy(cfg: ExperimentConfig, inject: Sequence[np.ndarray] = ()) -> DichotomyResult:
    """Classify kernel vectors of random (n-1) x n matrices.

    Each trial is 'cons' when v(A) is almost constant at (delta, rho), else
    'small_threshold' when the Monte Carlo concentration at radius r0 is at
    most tau0, else 'neither'. Matrices in ``inject`` are classified first."""
    d = cfg.distribution()
    n = cfg.n
    if n < 2:
        raise ConfigError("n must be at least 2")
    _set_threads(cfg.workers)
    params = ConsParams(cfg.delta, cfg.rho)
    out = []
    for i, A in enumerate(inject):
        out.append(_classify_kernel(d, kernel_vector(A), params, cfg, 10_000 + i, -1 - i))
    for tr in range(cfg.trials):
        A = sample_matrix(d, n - 1, cfg.rng(2 + 2 * tr), n_cols=n).values()
        out.append(_classify_kernel(d, kernel_vector(A), params, cfg, 3 + 2 * tr, tr))
    total = len(out)
    frac = {lab: sum(o.label == lab for o in out) / total for lab in ("cons", "small_threshold", "neither")}
    return DichotomyResult(frac["cons"], frac["small_threshold"], frac["neither"], cfg.r0, cfg.tau0, tuple(out))


# --- anticoncentration sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    index: int
    kind: str
    accepted: bool
    margin: Fraction | None


@dataclass(frozen=True)
class SweepResult:
    mode: str
    bound: Fraction  # ||p||_2^2 or ||p||_inf
    min_margin: Fraction | None
    argmin: np.ndarray | None
    accepted: int
    rejected: int
    boundary_margins: dict[str, Fraction]
    rows: tuple[SweepRow, ...]


def _sweep_vectors(n: int, count: int, rng) -> list[tuple[str, np.ndarray]]:
    """A mix of dense Gaussian, sparse, and near-elementary unit vectors."""
    st = as_stream(rng)
    out = []
    kinds = ("gaussian", "sparse", "near_elem", "two_level")
    for c in range(count):
        kind = kinds[c % len(kinds)]
        u = st.u64(4 * n).astype(np.float64) * 2.0**-64
        u = np.clip(u, 1e-300, 1.0)
        g = np.sqrt(-2 * np.log(u[:n])) * np.cos(2 * np.pi * u[n : 2 * n])
        if kind == "gaussian":
            x = g
        elif kind == "sparse":
            keep = 1 + int(u[2 * n] * 3)
            x = np.zeros(n)
            idx = np.argsort(u[3 * n : 4 * n])[:keep]
            x[idx] = g[idx]
            if keep == 1:
                x[idx[0]] = 1.0
                x[(idx[0] + 1) % n] = 0.3 + u[2 * n + 1]
        elif kind == "near_elem":
            i, j = int(u[2 * n] * n), int(u[2 * n + 1] * n)
            if i == j:
                j = (i + 1) % n
            x = 0.25 * g / np.linalg.norm(g)
            x[i] += 1.0
            x[j] += -1.0 if u[2 * n + 2] < 0.5 else 1.0
        else:
            x = np.where(u[3 * n : 4 * n] < 0.5, 1.0, -1.0) + 0.1 * g
        out.append((kind, x / np.linalg.norm(x)))
    return out


def sweep_margin(d: DiscreteDist, x, theta, mode: str) -> Fraction:
    """bound - L(sum b_i x_i, theta), computed exactly over the sum law."""
    bound = p2_sq(d) if mode == "prop51" else p_inf(d)
    return bound - levy(sum_dist(d, x), theta)


def anticoncentration_sweep(cfg: ExperimentConfig) -> SweepResult:
    d = cfg.distribution()
    n = cfg.n
    mode = cfg.sweep_mode
    bound = p2_sq(d) if mode == "prop51" else p_inf(d)
    boundary: dict[str, Fraction] = {}
    if n >= 2:
        v = np.zeros(n)
        v[0], v[1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
        boundary["(e1-e2)/sqrt2"] = sweep_margin(d, v, cfg.theta, mode)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        boundary[f"e{i + 1}"] = sweep_margin(d, e, cfg.theta, mode)
        boundary[f"-e{i + 1}"] = sweep_margin(d, -e, cfg.theta, mode)
    rows = []
    best: Fraction | None = None
    arg = None
    acc = rej = 0
    for c, (kind, x) in enumerate(_sweep_vectors(n, cfg.samples, cfg.rng(4))):
        if mode == "prop51" and elem_classify(x, cfg.delta_prime) is not None:
            rej += 1
            rows.append(SweepRow(c, kind, False, None))
            continue
        acc += 1
        m = sweep_margin(d, x, cfg.theta, mode)
        rows.append(SweepRow(c, kind, True, m))
        if best is None or m < best:
            best, arg = m, x
    return SweepResult(mode, bound, best, arg, acc, rej, boundary, tuple(rows))
