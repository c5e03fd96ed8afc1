import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import first_order, random_stable
from phloewner.errors import CoincidentPointError, RankError
from phloewner.loewner import (build_loewner, detect_orders, reduce_realization, subtract_feedthrough,
                               sylvester_residual)
from phloewner.lti import as_oracle, eval_transfer
from phloewner.passive import PassiveLoewnerPencil
from phloewner.tangential import (LeftData, RightData, SamplingPlan, conjugate_close, realify,
                                  sample_data)


def _pencil(sys, num=40, policy="random-unit", seed=0):
    plan = SamplingPlan.logspace(-1, 1.5, num, direction_policy=policy, seed=seed)
    right, left = conjugate_close(*sample_data(as_oracle(sys), plan))
    return realify(build_loewner(right, left))


def test_entrywise_definition():
    right = RightData(np.array([1.0, 2.0]), np.ones((1, 2)), np.array([[0.5, 1 / 3]]))
    left = LeftData(np.array([3.0]), np.ones((1, 1)), np.array([[0.25]]))
    P = build_loewner(right, left)
    # samples of H(s) = 1/(s+1)
    for j, lam in enumerate([1.0, 2.0]):
        mu = 3.0
        v, w = 1 / (mu + 1), 1 / (lam + 1)
        assert P.LL[0, j] == pytest.approx((v - w) / (mu - lam))
        assert P.sLL[0, j] == pytest.approx((mu * v - w * lam) / (mu - lam))


def test_coincident_points():
    right = RightData(np.array([1j]), np.ones((1, 1)), np.ones((1, 1)))
    left = LeftData(np.array([1j]), np.ones((1, 1)), np.ones((1, 1)))
    with pytest.raises(CoincidentPointError):
        build_loewner(right, left)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 10_000))
def test_sylvester_identities(n, m, seed):
    sys = random_stable(np.random.default_rng(seed), n, m)
    P = _pencil(sys, num=12, seed=seed)
    r1, r2 = sylvester_residual(P)
    assert r1 < 1e-10 and r2 < 1e-10


@pytest.mark.parametrize("n,m", [(3, 1), (6, 2), (8, 3)])
def test_exact_recovery_of_minimal_order(n, m):
    rng = np.random.default_rng(n)
    sys = random_stable(rng, n, m)
    P = _pencil(sys)
    rep = detect_orders(P)
    assert rep.r == n and rep.nu == n and not rep.undetermined
    red = reduce_realization(P, rep.r)
    for w in (0.05, 0.7, 30.0):
        H = eval_transfer(sys, 1j * w)
        assert np.linalg.norm(eval_transfer(red, 1j * w) - H) <= 1e-8 * np.linalg.norm(H)


def test_feedthrough_raises_rank_of_concatenation():
    sys = first_order(d=2.0)
    P = _pencil(sys, num=10, policy="cycled-identity")
    rep = detect_orders(P)
    assert rep.nu == 1 and rep.r == 2
    Q = subtract_feedthrough(P, [[2.0]])
    rep2 = detect_orders(Q)
    assert rep2.r == 1
    red = reduce_realization(Q, 1, [[2.0]])
    assert eval_transfer(red, 3j)[0, 0] == pytest.approx(1 / (3j + 1) + 2, rel=1e-10)


def test_order_above_rank_is_refused():
    P = _pencil(first_order(), num=10, policy="cycled-identity")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(RankError):
            reduce_realization(P, 3)


def test_subtract_feedthrough_keeps_subclass():
    P = _pencil(first_order(), num=6, policy="cycled-identity")
    pp = PassiveLoewnerPencil(**{f: getattr(P, f) for f in
                                 ("LL", "sLL", "V", "W", "Lam", "Mu", "R", "L", "right", "left", "realified")})
    assert isinstance(subtract_feedthrough(pp, [[1.0]]), PassiveLoewnerPencil)
