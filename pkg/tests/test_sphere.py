import math
from fractions import Fraction as F

import numpy as np
import pytest

from oracles import gaussian_unit
from singlab.distribution import bernoulli, derived_dists
from singlab.sampler import RngSeed
from singlab.sphere import (
    ConsParams,
    RoundingFailed,
    cons_membership,
    elem_classify,
    noncons_witness,
    randomized_round,
)


def test_constant_vector_in_cons():
    n = 16
    w = cons_membership(np.full(n, 1 / math.sqrt(n)), ConsParams(0.1, 0.1))
    assert w is not None and w.lam == pytest.approx(1 / math.sqrt(n))
    assert w.covered == tuple(range(n))


def test_basis_vector_in_cons():
    n = 10
    e = np.zeros(n)
    e[0] = 1
    w = cons_membership(e, ConsParams(0.1, 0.1))
    assert w.lam == 0 and w.covered == tuple(range(1, n))


def test_split_vector_not_in_cons():
    n = 20
    x = np.array([1.0] * 10 + [-1.0] * 10) / math.sqrt(n)
    assert cons_membership(x, ConsParams(0.1, 0.1)) is None


def test_cons_rejects_non_unit():
    with pytest.raises(ValueError):
        cons_membership(np.ones(3), ConsParams(0.1, 0.1))


def test_elem_examples():
    n = 5
    x = np.zeros(n)
    x[0] = x[1] = 1 / math.sqrt(2)
    c = elem_classify(x, 0.1)
    assert (c.kind, c.i, c.j) == ("ElemPlus_ij", 0, 1)
    e = np.zeros(n)
    e[2] = 1
    c = elem_classify(e, 0.1)
    assert (c.kind, c.i) == ("Elem_i", 2)
    assert elem_classify(np.full(9, 1 / 3), 0.1) is None
    y = np.zeros(n)
    y[3], y[1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    c = elem_classify(y, 0.1)
    assert (c.kind, c.i, c.j, c.sign) == ("Elem_ij", 3, 1, 1)


def test_elem_sign_handling():
    e = np.zeros(4)
    e[1] = -1
    assert elem_classify(e, 0.1).sign == -1
    assert elem_classify(e, 0.1, signed=False) is None


def test_elem_permutation_equivariance():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = 8
        x = np.zeros(n)
        i, j = rng.choice(n, 2, replace=False)
        x[i], x[j] = 1.0, rng.choice([-1.0, 1.0])
        x += 0.03 * rng.standard_normal(n)
        x /= np.linalg.norm(x)
        perm = rng.permutation(n)
        a, b = elem_classify(x, 0.15), elem_classify(x[perm], 0.15)
        assert a is not None and b is not None and a.kind == b.kind
        # index k of x[perm] is index perm[k] of x
        assert {a.i, a.j} == {int(perm[b.i]), None if b.j is None else int(perm[b.j])}


def test_elementary_vectors_are_almost_constant():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(10, 40))
        x = np.zeros(n)
        i, j = rng.choice(n, 2, replace=False)
        x[i] = 1
        if rng.random() < 0.5:
            x[j] = rng.choice([-1.0, 1.0])
        x += 0.2 / math.sqrt(n) * rng.standard_normal(n) / 3
        x /= np.linalg.norm(x)
        if elem_classify(x, 0.2) is not None:
            assert cons_membership(x, ConsParams(0.6, 3.0)) is not None


def test_noncons_split_vector_case2():
    n = 20
    x = np.array([1.0] * 10 + [-1.0] * 10) / math.sqrt(n)
    w = noncons_witness(x, ConsParams(0.1, 0.1))
    assert w.case == 2 and w.kappa < 1 < w.kappa_prime and w.nu == 0.5


def test_noncons_zero_block_case1():
    n = 20
    x = np.array([0.0] * 5 + [1.0] * 15)
    x /= np.linalg.norm(x)
    w = noncons_witness(x, ConsParams(0.1, 0.1))
    assert w.case == 1
    u = math.sqrt(n) * np.abs(x)
    assert all(u[i] <= w.kappa for i in w.group_a)
    assert all(w.kappa + w.nu_prime < u[i] <= w.kappa_prime for i in w.group_b)
    assert min(len(w.group_a), len(w.group_b)) >= w.nu * n


def test_noncons_rejects_cons_input():
    with pytest.raises(ValueError):
        noncons_witness(np.full(9, 1 / 3), ConsParams(0.1, 0.1))


def test_noncons_always_found_for_random_vectors():
    rng = np.random.default_rng(6)
    p = ConsParams(0.1, 0.1)
    found = 0
    while found < 1000:
        x = gaussian_unit(rng, int(rng.integers(10, 60)))
        if cons_membership(x, p) is not None:
            continue
        noncons_witness(x, p)
        found += 1


def test_round_integral_input_unchanged():
    dd = derived_dists(bernoulli(F(1, 2))).diff
    y = np.array([1.0, -2.0, 3.0])
    r = randomized_round(y, 0.0, 1.0, dd, 10, 1)
    assert np.array_equal(r.y_round, y.astype(int)) and r.retries == 0


def test_round_half_vector():
    dd = derived_dists(bernoulli(F(1, 2))).diff
    y = np.full(100, 0.5)
    r = randomized_round(y, 0.0, 1.0, dd, 100, 2)
    assert np.max(np.abs(y - r.y_round)) == 0.5
    assert abs(y.sum() - r.y_round.sum()) <= 3 * math.sqrt(100)


def test_round_quarter_mean():
    dd = derived_dists(bernoulli(F(1, 2))).diff
    y = np.full(16, 0.25)
    seed = RngSeed(7)
    from singlab.sampler import as_stream

    st = as_stream(seed)
    sums = [randomized_round(y, 0.0, 1.0, dd, 50, st).y_round.sum() for _ in range(10_000)]
    # conditioning on |sum - 4| <= 12 is nearly vacuous, so the binomial mean 4 applies
    assert abs(np.mean(sums) - 4) <= 5 * math.sqrt(3) / 100


def test_round_failure_reported():
    dd = derived_dists(bernoulli(F(1, 2))).diff
    with pytest.raises(RoundingFailed):
        randomized_round(np.full(4, 0.5), 0, 1, dd, 0, 1)
