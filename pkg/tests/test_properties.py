"""Hypothesis property tests for the stated invariants."""
import math
from fractions import Fraction as F

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import conditional_law, sum_law, window_sup
from singlab.distribution import (
    DiscreteDist,
    derived_dists,
    entropy,
    is_uniform,
    p2_sq,
    p_inf,
    predicted_probabilities,
    symmetric_shift,
)
from singlab.exact import enumerate_dominant_union, enumerate_singularity
from singlab.levy import SliceConstraint, convolve, levy, levy_conditional, sum_dist
from singlab.smoothing import default_test_function, run_recursion
from singlab.sphere import ConsParams, cons_membership, randomized_round
from singlab.spectral import smallest_singular

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def dists(draw, min_k=2, max_k=4):
    k = draw(st.integers(min_k, max_k))
    atoms = draw(st.lists(st.integers(-4, 4), min_size=k, max_size=k, unique=True))
    weights = draw(st.lists(st.integers(1, 9), min_size=k, max_size=k))
    tot = sum(weights)
    return DiscreteDist.create(atoms, [F(w, tot) for w in weights])


int_vectors = st.lists(st.integers(-6, 6), min_size=1, max_size=7)
radii = st.fractions(min_value=0, max_value=10, max_denominator=4)


@SETTINGS
@given(dists(), st.integers(1, 8))
def test_predicted_probability_identities(d, n):
    pr = predicted_probabilities(d, n)
    assert pr.pE1minus == p2_sq(d) ** n
    assert pr.pE1plus <= pr.pE1minus
    if symmetric_shift(d) == 0:
        assert pr.pE1plus == pr.pE1minus


@SETTINGS
@given(dists())
def test_norm_chain_and_derived_masses(d):
    q2, qi = p2_sq(d), p_inf(d)
    assert math.exp(-entropy(d)) <= float(q2) * (1 + 1e-12)
    assert q2 <= qi
    if is_uniform(d):
        assert q2 == qi and math.isclose(math.exp(-entropy(d)), float(q2), rel_tol=1e-12)
    else:
        assert q2 < qi
    dd = derived_dists(d)
    assert sum(dd.diff.probs) == 1 and sum(dd.sum.probs) == 1


@SETTINGS
@given(dists(), int_vectors, radii, radii)
def test_levy_monotone_in_radius(d, x, r1, r2):
    s = sum_dist(d, x)
    lo, hi = sorted((r1, r2))
    assert levy(s, lo) <= levy(s, hi)


@SETTINGS
@given(dists(), int_vectors, int_vectors, radii)
def test_levy_independent_sum_domination(d, x, y, r):
    a, b = sum_dist(d, x), sum_dist(d, y)
    assert levy(convolve(a, b), r) <= min(levy(a, r), levy(b, r))


@SETTINGS
@given(dists(), int_vectors, radii, st.randoms(use_true_random=False))
def test_levy_permutation_invariance(d, x, r, rnd):
    y = list(x)
    rnd.shuffle(y)
    assert levy(sum_dist(d, x), r) == levy(sum_dist(d, y), r)


@SETTINGS
@given(dists(max_k=3), st.lists(st.integers(-5, 5), min_size=1, max_size=8))
def test_dp_matches_naive_enumeration(d, x):
    s = sum_dist(d, x)
    assert dict(zip(s.values, s.masses)) == sum_law(d.atoms, d.probs, x)


@SETTINGS
@given(dists(max_k=3), st.lists(st.integers(-5, 5), min_size=1, max_size=7), radii)
def test_conditional_full_band_equals_levy(d, x, r):
    full = SliceConstraint.unconstrained(d.k, len(x))
    assert levy_conditional(d, x, full, r) == levy(sum_dist(d, x), r)


@SETTINGS
@given(st.integers(0, 1), st.lists(st.integers(-5, 5), min_size=2, max_size=8), radii)
def test_conditional_matches_filtered_enumeration(seed, x, r):
    d = DiscreteDist.create([0, 1], ["1/3", "2/3"])
    n = len(x)
    c = SliceConstraint(n, (0, max(0, n // 3 - seed)), (n, min(n, n // 3 + 1 + seed)))
    law = conditional_law(d.atoms, d.probs, x, c.lower, c.upper)
    if not law:
        return
    assert levy_conditional(d, x, c, r) == window_sup(law, r)


@settings(max_examples=15, deadline=None)
@given(dists(max_k=2), st.integers(1, 2), st.fractions(min_value=-3, max_value=3, max_denominator=3).filter(bool))
def test_enumeration_invariant_under_atom_permutation_and_scaling(d, n, c):
    base = enumerate_singularity(d, n).probability
    rev = DiscreteDist.create(list(reversed(d.atoms)), list(reversed(d.probs)))
    assert enumerate_singularity(rev, n).probability == base
    scaled = DiscreteDist.create([c * a for a in d.atoms], d.probs)
    assert enumerate_singularity(scaled, n).probability == base
    assert enumerate_dominant_union(d, n).probability <= base


@SETTINGS
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_smallest_singular_transpose_and_permutation(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    s = smallest_singular(a)
    p, q = np.eye(n)[rng.permutation(n)], np.eye(n)[rng.permutation(n)]
    assert math.isclose(smallest_singular(a.T), s, rel_tol=1e-9)
    assert math.isclose(smallest_singular(p @ a @ q), s, rel_tol=1e-9)


@SETTINGS
@given(st.integers(10, 40), st.integers(0, 2**32 - 1))
def test_cons_permutation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    x = np.full(n, 1.0) + rng.choice([0.0, 0.3, 3.0], size=n, p=[0.8, 0.15, 0.05]) * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    perm = rng.permutation(n)
    p = ConsParams(0.1, 1.0)
    a, b = cons_membership(x, p), cons_membership(x[perm], p)
    assert (a is None) == (b is None)
    if a is not None:
        assert a.lam == b.lam
        assert sorted(a.covered) == sorted(int(perm[i]) for i in b.covered)


@SETTINGS
@given(st.lists(st.floats(-20, 20, allow_nan=False), min_size=1, max_size=50), st.integers(0, 2**32 - 1))
def test_randomized_round_coordinatewise(y, seed):
    d = DiscreteDist.create([0, 1], ["1/2", "1/2"])
    yv = np.array(y)
    r = randomized_round(yv, 0.0, 1.0, derived_dists(d).diff, 1000, seed)
    assert np.all(np.abs(yv - r.y_round) < 1)
    assert np.all((r.y_round == np.floor(yv)) | (r.y_round == np.ceil(yv)))
    assert abs(yv.sum() - r.y_round.sum()) <= 3 * math.sqrt(len(y))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=6), st.integers(0, 3), st.sampled_from([0.25, 0.5, 1.0]))
def test_recursion_conserves_mass(X, split, step):
    d = DiscreteDist.create([0, 1], ["2/5", "3/5"])
    n = len(X)
    s = (min(split, n), n - min(split, n))
    f = default_test_function(n, step)
    g = run_recursion(f, d, X, s).top
    assert math.isclose(g.mass(), 1.0, rel_tol=1e-9)
    assert g.lipschitz_excess() <= 1e-9
