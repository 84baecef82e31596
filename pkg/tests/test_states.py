import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmflow.info import binary_entropy, concurrence, entanglement_of_formation, entropy
from nmflow.qmat import hermitian_eig, partial_trace
from nmflow.states import (
    bell_state,
    bloch_to_density,
    check_density,
    density_to_bloch,
    is_pure,
    projector,
    pure_sa_from_bloch,
    purify,
    random_bloch,
    random_density,
    spherical_to_bloch,
    validate,
)


def test_bloch_to_density_examples():
    assert np.allclose(bloch_to_density([0, 0, 0]), np.eye(2) / 2)
    assert np.allclose(bloch_to_density([0, 0, 1]), np.diag([1, 0]))
    w = hermitian_eig(bloch_to_density([0.6, 0, 0])).eigenvalues
    assert np.allclose(w, [0.8, 0.2], atol=1e-15)


def test_bloch_rejects_outside_ball():
    with pytest.raises(ValueError, match="exceeds 1"):
        bloch_to_density([0.8, 0.8, 0.0])
    with pytest.raises(ValueError):
        bloch_to_density([1.0, 0.0])


def test_bloch_round_trip(rng):
    r = random_bloch(rng, 50)
    assert np.allclose(density_to_bloch(bloch_to_density(r)), r, atol=1e-14)


def test_spherical_to_bloch():
    assert np.allclose(spherical_to_bloch(1.0, np.pi / 2, 0.0), [1, 0, 0])
    assert np.allclose(spherical_to_bloch(0.5, 0.0, 1.3), [0, 0, 0.5])


def test_purify_examples():
    psi = purify(np.diag([1.0, 0.0]))
    assert np.allclose(psi, np.diag([1, 0, 0, 0]))
    half = purify(np.eye(2) / 2)
    assert np.allclose(partial_trace(half, [2, 2], [0]), np.eye(2) / 2)
    a = 0.3
    # descending eigenvalues: the 0.7 weight comes first on the ancilla
    canon = purify(np.diag([a, 1 - a]))
    ket = np.zeros(4)
    ket[0b10] = np.sqrt(1 - a)  # |1>_sys |0>_anc
    ket[0b01] = np.sqrt(a)  # |0>_sys |1>_anc
    assert np.allclose(np.abs(canon), np.abs(np.outer(ket, ket)), atol=1e-15)
    a = 0.7
    canon = purify(np.diag([a, 1 - a]))
    ket = np.array([np.sqrt(a), 0, 0, np.sqrt(1 - a)])
    assert np.allclose(np.abs(canon), np.outer(ket, ket), atol=1e-15)


def test_purify_is_pure_and_marginal_matches(rng):
    for n in range(200):
        d = (2, 3)[n % 2]
        rho = random_density(d, rng)
        big = purify(rho)
        w = hermitian_eig(big).eigenvalues
        assert abs(w[0] - 1) <= 1e-10 and np.all(np.abs(w[1:]) <= 1e-10)
        assert np.max(np.abs(partial_trace(big, [d, d], [0]) - rho)) <= 1e-10


def test_pure_sa_from_bloch_examples():
    assert entanglement_of_formation(pure_sa_from_bloch([0, 0, 0])) == pytest.approx(1.0, abs=1e-12)
    assert entanglement_of_formation(pure_sa_from_bloch([0, 0, 1])) == pytest.approx(0.0, abs=1e-12)
    c = 2 * np.sqrt(0.75 * 0.25)
    expect = binary_entropy((1 + np.sqrt(1 - c**2)) / 2)
    assert entanglement_of_formation(pure_sa_from_bloch([0, 0, 0.5])) == pytest.approx(expect, abs=1e-12)


def test_pure_sa_marginals_batch(rng):
    r = random_bloch(rng, 1000)
    sa = pure_sa_from_bloch(r)
    rho_a = partial_trace(sa, [2, 2], [1])
    assert np.max(np.abs(rho_a - bloch_to_density(r))) <= 1e-10
    s_s = np.asarray(entropy(partial_trace(sa, [2, 2], [0])))
    s_a = np.asarray(entropy(rho_a))
    assert np.max(np.abs(s_s - s_a)) <= 1e-10
    purity = np.real(np.einsum("nij,nji->n", sa, sa))
    assert np.max(np.abs(purity - 1)) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.0, 1.0),
    st.floats(0.0, np.pi),
    st.floats(0.0, 2 * np.pi),
)
def test_pure_sa_concurrence_matches_spectrum(radius, theta, phi):
    r = spherical_to_bloch(radius, theta, phi)
    lam1, lam2 = (1 + radius) / 2, (1 - radius) / 2
    assert concurrence(pure_sa_from_bloch(r)) == pytest.approx(2 * np.sqrt(lam1 * lam2), abs=1e-7)


def test_validate_examples():
    assert validate(np.eye(2) / 2) == []
    assert validate(bell_state()) == []
    bad = validate(np.diag([1.5, -0.5]))
    assert [v.invariant for v in bad] == ["positivity"]
    assert bad[0].magnitude == pytest.approx(0.5)
    names = {v.invariant for v in validate(np.array([[0.5, 1.0], [0.0, 0.7]]))}
    assert names == {"hermitian", "unit_trace"}
    assert validate(np.ones((2, 3)))[0].invariant == "square"


def test_check_density_raises_with_details():
    with pytest.raises(ValueError, match="positivity"):
        check_density(np.diag([1.5, -0.5]))
    check_density(np.eye(4) / 4)


def test_random_density_is_valid(rng):
    for rank in (1, 2, 3, None):
        rho = random_density(3, rng, rank)
        assert validate(rho) == []
    assert is_pure(random_density(4, rng, 1))
    assert not is_pure(np.eye(2) / 2)


def test_random_bloch_in_ball(rng):
    r = random_bloch(rng, 1000)
    assert np.all(np.linalg.norm(r, axis=1) <= 1.0)
    assert random_bloch(rng).shape == (3,)


def test_projector_batch():
    kets = np.eye(3)
    assert np.allclose(projector(kets), [np.diag(k) for k in np.eye(3)])
