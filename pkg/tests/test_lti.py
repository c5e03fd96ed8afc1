import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import first_order, random_ph
from phloewner.errors import SingularShiftError, ValidationError
from phloewner.lti import (DescriptorRealization, PHRealization, classify_passivity, eval_transfer,
                           frequency_response, pencil_eigenvalues, ph_to_descriptor, spectral_density,
                           stability_class, to_coenergy, to_standard)

GRID = np.logspace(-2, 2, 40)


def test_first_order_transfer():
    sys = first_order()
    for s in (0.5j, 1 + 2j, 3.0):
        assert eval_transfer(sys, s)[0, 0] == pytest.approx(1 / (s + 1), rel=1e-14)


def test_shape_validation():
    with pytest.raises(ValidationError):
        DescriptorRealization(A=np.eye(2), B=np.ones((3, 1)), C=np.ones((1, 2)), D=[[0.0]])
    with pytest.raises(ValidationError):
        PHRealization(J=np.zeros((2, 2)), R=np.zeros((3, 3)), G=np.ones((2, 1)))


def test_singular_shift():
    integrator = DescriptorRealization(A=[[0.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
    with pytest.raises(SingularShiftError):
        eval_transfer(integrator, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 100))
def test_sparse_and_dense_evaluation_agree(re, w):
    rng = np.random.default_rng(7)
    ph = random_ph(rng, 6, 2)
    sph = PHRealization(J=sp.csr_matrix(ph.J), R=sp.csr_matrix(ph.R), G=sp.csr_matrix(ph.G),
                        P=sp.csr_matrix(ph.P), N=ph.N, S=ph.S)
    s = complex(re, w)
    assert np.allclose(eval_transfer(ph, s), eval_transfer(sph, s), rtol=1e-10, atol=1e-12)


def test_ph_descriptor_and_coenergy_agree():
    rng = np.random.default_rng(3)
    ph = random_ph(rng, 5, 2)
    Q = np.diag(rng.uniform(1, 2, 5))
    M = Q @ np.diag(rng.uniform(1, 2, 5))  # Q^T M symmetric
    ph_q = PHRealization(J=ph.J, R=ph.R, G=ph.G, P=ph.P, N=ph.N, S=ph.S, M=M, Q=Q)
    co = to_coenergy(ph_q)
    assert np.allclose(co.Q, np.eye(5))
    desc = ph_to_descriptor(ph_q)
    for w in (0.1, 1.0, 10.0):
        ref = eval_transfer(ph_q, 1j * w)
        assert np.allclose(eval_transfer(co, 1j * w), ref, rtol=1e-10)
        assert np.allclose(eval_transfer(desc, 1j * w), ref, rtol=1e-10)


def test_coenergy_rejects_incompatible_q():
    ph = PHRealization(J=np.zeros((2, 2)), R=np.eye(2), G=np.ones((2, 1)),
                       M=np.array([[1.0, 0.5], [0.5, 1.0]]), Q=np.diag([1.0, 2.0]))
    with pytest.raises(ValidationError):
        to_coenergy(ph)


def test_check_flags_broken_structure():
    rng = np.random.default_rng(0)
    ph = random_ph(rng, 4, 1)
    assert ph.check()["valid"]
    bad = PHRealization(J=ph.J + np.eye(4), R=ph.R, G=ph.G, P=ph.P, N=ph.N, S=ph.S)
    assert not bad.check()["valid"]
    with pytest.raises(ValidationError):
        bad.validate()
    neg = PHRealization(J=ph.J, R=-ph.R, G=ph.G)
    assert neg.check()["dissipation_min_eig"] < 0


def test_frequency_response_shape():
    rng = np.random.default_rng(1)
    ph = random_ph(rng, 4, 3)
    H = frequency_response(ph, 1j * GRID[:5])
    assert H.shape == (5, 3, 3)


def test_spectral_density_on_axis_is_hermitian_part():
    sys = first_order(d=1.0)
    w = 0.7
    phi = spectral_density(sys, 1j * w)[0, 0]
    assert phi == pytest.approx(2 * (1 / (1j * w + 1)).real + 2, rel=1e-14)


@pytest.mark.parametrize("sys, expected", [
    (first_order(d=1.0), "strictly-passive"),
    (first_order(), "passive"),
    (first_order(pole=1.0), "not-passive"),
    (first_order(gain=-1.0), "not-passive"),
    (DescriptorRealization(A=[[0.0]], B=[[1.0]], C=[[1.0]], D=[[1.0]]), "passive"),
])
def test_classify_passivity(sys, expected):
    assert classify_passivity(sys, GRID).classification == expected


def test_semisimple_axis_eigenvalues_are_stable():
    A = np.zeros((2, 2))
    assert stability_class(np.zeros(2, complex), A, np.eye(2)) == "stable"
    jordan = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert stability_class(np.zeros(2, complex), jordan, np.eye(2)) == "unstable"


def test_to_standard_index_one():
    E = np.diag([1.0, 0.0])
    A = np.array([[-1.0, 1.0], [1.0, -2.0]])
    B = np.array([[1.0], [1.0]])
    C = np.array([[1.0, 1.0]])
    sys = DescriptorRealization(A=A, B=B, C=C, D=[[0.0]], E=E)
    std = to_standard(sys)
    assert std.n == 1
    for s in (0.3j, 2j, 1.5):
        assert np.allclose(eval_transfer(std, s), eval_transfer(sys, s), rtol=1e-12)
    assert pencil_eigenvalues(sys).size == 1


def test_to_standard_rejects_higher_index():
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    sys = DescriptorRealization(A=np.eye(2), B=np.ones((2, 1)), C=np.ones((1, 2)), D=[[0.0]], E=E)
    with pytest.raises(ValidationError):
        to_standard(sys)
