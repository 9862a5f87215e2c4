import math
from fractions import Fraction as F

import numpy as np
import pytest

from singlab.distribution import bernoulli, p2_sq
from singlab.experiments import (
    ConfigError,
    ExperimentConfig,
    anticoncentration_sweep,
    compressible_trial,
    mc_singularity,
    smallest_singular_batch,
    structure_dichotomy,
    sweep_margin,
    tail_curve,
    union_check,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(n=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(t_grid=[0.5, 0.1])
    with pytest.raises(ConfigError):
        ExperimentConfig(dist="poisson")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(lam=0.7)


def test_config_merge_ignores_none():
    cfg = ExperimentConfig(n=7, seed=3)
    m = cfg.merged({"n": 9, "seed": None})
    assert m.n == 9 and m.seed == 3
    assert ExperimentConfig.from_dict(m.to_json()) == m


def test_mc_small_n_against_exact():
    cfg = ExperimentConfig(dist="ber:1/2", n=2, samples=200_000, seed=1)
    r = mc_singularity(cfg)
    assert abs(r.estimate - 10 / 16) <= 5 * math.sqrt(10 / 16 * 6 / 16 / cfg.samples)
    assert mc_singularity(ExperimentConfig(dist="rademacher", n=1, samples=1000)).hits == 0


def test_mc_deterministic_across_workers_and_chunks():
    a = mc_singularity(ExperimentConfig(n=6, samples=50_000, seed=4, workers=1, chunk=1000))
    b = mc_singularity(ExperimentConfig(n=6, samples=50_000, seed=4, workers=4))
    assert a.hits == b.hits


def test_union_never_exceeds_singular():
    r = union_check(ExperimentConfig(n=6, samples=50_000, seed=2))
    assert r.violations == 0 and r.union_hits <= r.singular_hits


def test_smallest_singular_batch_zero_on_singular():
    d = bernoulli(F(1, 2))
    s = smallest_singular_batch(d, 3, 5, 0, 2000)
    assert np.any(s == 0) and np.all(s >= 0)


def test_tail_curve_monotone():
    c = tail_curve(ExperimentConfig(n=8, samples=20_000, t_grid=[0, 0.1, 0.5, 1.0, 2.0]))
    p = [r.p_hat for r in c.rows]
    assert all(a <= b for a, b in zip(p, p[1:]))
    assert set(c.slopes()) == {0.1, 0.5, 1.0, 2.0}
    with pytest.raises(ConfigError):
        tail_curve(ExperimentConfig(n=4, samples=10, t_grid=[0, 3.0]))


def test_compressible_e1_large_t_always_hits():
    cfg = ExperimentConfig(n=10, samples=5000)
    r = compressible_trial(cfg, t=10.0, centres="e1")
    assert r.frequency == 1.0 and r.net_size == 1
    r0 = compressible_trial(cfg, t=0.0, centres="e1")
    # zero first column has probability 2^-10
    assert abs(r0.frequency - 2**-10) <= 5 * math.sqrt(2**-10 / cfg.samples)


def test_compressible_net_budget():
    with pytest.raises(ConfigError):
        compressible_trial(ExperimentConfig(n=10, samples=10, net_budget=50))


def test_dichotomy_fractions_and_injection():
    # e_n is almost constant once floor(delta n) >= 1 coordinate is free
    cfg = ExperimentConfig(n=20, trials=6, levy_samples=5000)
    A = np.hstack([np.eye(19), np.zeros((19, 1))])
    r = structure_dichotomy(cfg, inject=[A])
    assert r.frac_cons + r.frac_small_threshold + r.frac_neither == pytest.approx(1.0)
    assert r.trials[0].label == "cons" and r.trials[0].trial == -1
    assert len(r.trials) == 7


def test_sweep_boundary_margins():
    cfg = ExperimentConfig(dist="ber:3/10", n=5, samples=40)
    r = anticoncentration_sweep(cfg)
    assert r.boundary_margins["(e1-e2)/sqrt2"] == 0
    assert r.bound == p2_sq(bernoulli(F(3, 10)))
    assert r.accepted + r.rejected == 40
    assert r.min_margin is not None and r.min_margin >= 0


def test_sweep_margin_lemma_mode():
    d = bernoulli(F(3, 10))
    e = np.zeros(3)
    e[0] = 1
    assert sweep_margin(d, e, 1e-3, "lemma41") == 0
