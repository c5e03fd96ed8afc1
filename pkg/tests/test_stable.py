import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import first_order, random_stable
from phloewner.errors import AxisEigenvalueError, ValidationError
from phloewner.lti import DescriptorRealization, eval_transfer
from phloewner.stable import (hankel_gramians, hankel_singular_values, linf_error, nehari_stable,
                              p_infinity, separate)


def _antistable(rng, n, m, p):
    s = random_stable(rng, n, m, p)
    return DescriptorRealization(A=-s.A, B=s.B, C=s.C, D=np.zeros((p, m)))


def test_scalar_oracle():
    res = p_infinity(first_order(pole=1.0), "nehari", band=(1e-2, 1e2))
    assert res.hankel_bound == pytest.approx(0.5, abs=1e-12)
    assert res.achieved_error == pytest.approx(0.5, abs=1e-8)
    F = res.projected
    assert F.n == 0
    assert F.D[0, 0] == pytest.approx(-0.5, abs=1e-12)


def test_hankel_singular_values_of_first_order():
    P, Q = hankel_gramians(first_order(pole=2.0, gain=3.0))
    assert hankel_singular_values(P, Q)[0] == pytest.approx(3 / 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_nehari_error_equals_largest_hankel_value(n, m, p, seed):
    anti = _antistable(np.random.default_rng(seed), n, m, p)
    F, sigma = nehari_stable(anti)
    assert np.all(la.eigvals(F.A).real < 0) if F.n else True
    # all-pass error: the gain is sigma at every frequency
    for w in (0.01, 0.3, 1.0, 7.0, 100.0):
        E = eval_transfer(anti, 1j * w) - eval_transfer(F, 1j * w)
        assert la.svdvals(E)[0] == pytest.approx(sigma, rel=1e-6)


def test_stable_input_is_unchanged():
    sys = random_stable(np.random.default_rng(0), 4, 2)
    for mode in ("nehari", "reflect", "off"):
        res = p_infinity(sys, mode)
        assert res.projected is sys and res.achieved_error == 0.0


def test_mixed_system_keeps_stable_part():
    rng = np.random.default_rng(4)
    stab = random_stable(rng, 3, 1)
    anti = _antistable(rng, 2, 1, 1)
    A = la.block_diag(stab.A, anti.A)
    sys = DescriptorRealization(A=A, B=np.vstack([stab.B, anti.B]), C=np.hstack([stab.C, anti.C]), D=[[0.0]])
    split = separate(sys)
    assert split.stable_part.n == 3 and split.antistable_part.n == 2
    for w in (0.1, 2.0):
        assert eval_transfer(split.stable_part, 1j * w) == pytest.approx(eval_transfer(stab, 1j * w), rel=1e-9)
    res = p_infinity(sys, "nehari", band=(1e-2, 1e2))
    assert np.all(res.eig_after.real < 0)
    sigma = hankel_singular_values(*hankel_gramians(anti))[0]
    assert res.achieved_error == pytest.approx(sigma, rel=1e-2)
    refl = p_infinity(sys, "reflect", band=(1e-2, 1e2))
    assert np.all(refl.eig_after.real < 0)
    assert refl.achieved_error >= res.achieved_error * (1 - 1e-6)


def test_axis_eigenvalues():
    sys = DescriptorRealization(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[1.0], [0.0]], C=[[1.0, 0.0]], D=[[0.0]])
    with pytest.raises(AxisEigenvalueError):
        separate(sys, "raise")
    with pytest.warns(UserWarning):
        split = separate(sys, "reflect")
    assert len(split.reflected) == 2
    assert np.all(la.eigvals(split.stable_part.A).real < 0)


def test_off_mode_reports_bound_without_changing():
    res = p_infinity(first_order(pole=1.0), "off")
    assert res.projected.n == 1 and res.hankel_bound == pytest.approx(0.5)


def test_unknown_mode():
    with pytest.raises(ValidationError):
        p_infinity(first_order(), "magic")


def test_linf_error_grid():
    err = linf_error([(first_order(), 1.0)], (1e-3, 1e3), num=200)
    assert err == pytest.approx(1.0, rel=1e-5)
