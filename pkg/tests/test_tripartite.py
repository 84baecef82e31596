import numpy as np
import pytest

from nmflow.channels import AmplitudeDamping, GeneralizedAmplitudeDamping, apply_to_subsystem
from nmflow.info import EntropyDiagram, entropy
from nmflow.qmat import partial_trace
from nmflow.states import bell_state, pure_sa_from_bloch, random_bloch
from nmflow.tripartite import (
    ScenarioError,
    ScenarioSample,
    describe,
    evolve_scenario,
    sa_ket,
    sample_diagram,
    sweep,
    sweep_arrays,
)

from conftest import SCENARIOS, time_grid

NONMARKOV = AmplitudeDamping(1.0, 0.1)
FIRST_POLE = float(NONMARKOV.poles(20.0)[0])


@pytest.fixture(scope="module")
def bell_sweeps():
    return {name: sweep_arrays(bell_state(), fam, grid) for name, (fam, grid) in SCENARIOS.items()}


def test_sa_ket_rejects_mixed_input():
    with pytest.raises(ValueError, match="not pure"):
        sa_ket(np.eye(4) / 4)
    with pytest.raises(ValueError):
        sa_ket(np.eye(2))


def test_evolve_at_zero_is_initial_times_fresh_environment():
    for fam in (NONMARKOV, GeneralizedAmplitudeDamping(5.0)):
        k = fam.n_kraus
        env0 = np.zeros((k, k))
        env0[0, 0] = 1.0
        assert np.allclose(evolve_scenario(bell_state(), fam, 0.0), np.kron(bell_state(), env0), atol=1e-15)


def test_full_relaxation_moves_correlation_to_environment():
    state = evolve_scenario(bell_state(), NONMARKOV, FIRST_POLE)
    rho_a = partial_trace(state, [2, 2, 2], [1])
    assert np.allclose(rho_a, np.diag([1, 0]), atol=1e-12)
    d = sample_diagram(state, 1.0)
    assert d.I_tilde == pytest.approx(0.0, abs=1e-9)
    assert d.L_tilde == pytest.approx(2.0, abs=1e-9)
    assert d.J == pytest.approx(1.0, abs=1e-9)
    assert d.delta == pytest.approx(1.0, abs=1e-9)
    assert d.E_SA == pytest.approx(0.0, abs=1e-9)


def test_initial_diagram_of_bell_state():
    d = sample_diagram(evolve_scenario(bell_state(), NONMARKOV, 0.0), 1.0)
    for name, value in dict(I_tilde=2, L_tilde=0, N_tilde=0, J=0, E_SA=1, delta=0).items():
        assert getattr(d, name) == pytest.approx(value, abs=1e-12)


def test_random_evolutions_are_pure_and_local(rng):
    fams = [AmplitudeDamping(1.0, 3.0), NONMARKOV, GeneralizedAmplitudeDamping(5.0)]
    for n in range(100):
        fam = fams[n % 3]
        sa = pure_sa_from_bloch(random_bloch(rng))
        t = rng.uniform(0.0, 5.0)
        state = evolve_scenario(sa, fam, t)
        dims = [2, 2, fam.n_kraus]
        assert abs(np.real(np.trace(state @ state)) - 1) <= 1e-10
        rho_s = partial_trace(state, dims, [0])
        assert np.max(np.abs(rho_s - partial_trace(sa, [2, 2], [0]))) <= 1e-12
        direct = apply_to_subsystem(fam.kraus(t), sa, [2, 2], 1)
        assert np.max(np.abs(partial_trace(state, dims, [0, 1]) - direct)) <= 1e-10
        sample_diagram(state, entropy(rho_s)).check(1e-9)


def test_sample_diagram_invariants_random(rng):
    for fam in (NONMARKOV, GeneralizedAmplitudeDamping(5.0)):
        for _ in range(30):
            sa = pure_sa_from_bloch(random_bloch(rng))
            s_sys = sweep_arrays(sa, fam, [0.0, 0.1]).diagram.S_sys[0]
            d = sample_diagram(evolve_scenario(sa, fam, rng.uniform(0, 5)), s_sys)
            d.check(1e-9)


def test_sample_diagram_cross_checks_system_entropy():
    state = evolve_scenario(bell_state(), NONMARKOV, 1.0)
    with pytest.raises(ValueError, match="routes disagree"):
        sample_diagram(state, 0.5)


def test_sample_diagram_rejects_mixed_state():
    mixed = np.kron(bell_state(), np.eye(2) / 2)
    with pytest.raises(ValueError, match="mixed"):
        sample_diagram(mixed, 1.0)


def test_sweep_invariants(bell_sweeps):
    for name, res in bell_sweeps.items():
        res.diagram.check(1e-9)
        assert np.max(res.rho_s_drift) <= 1e-12, name
        assert np.max(np.abs(res.ternary)) <= 1e-9, name
        band = np.asarray(res.diagram.I_tilde) + res.diagram.L_tilde
        assert np.ptp(band) <= 1e-9
        d = res.diagram
        assert np.max(np.abs(np.diff(d.L_tilde) + np.diff(d.I_tilde))) <= 1e-9
        assert np.max(np.abs(np.diff(d.E_SA) + np.diff(d.J))) <= 1e-9


def test_sweep_curve_shapes(bell_sweeps):
    markov = bell_sweeps["ad_markov"].column("L_tilde")
    assert np.diff(markov).min() >= -1e-9
    nonmarkov = bell_sweeps["ad_nonmarkov"].column("L_tilde")
    assert np.diff(nonmarkov).min() < -1e-6
    gad = bell_sweeps["gad"]
    grid = gad.grid
    j_drop = grid[np.flatnonzero(np.diff(gad.column("J")) < 0)[0]]
    l_drop = grid[np.flatnonzero(np.diff(gad.column("L_tilde")) < 0)[0]]
    assert 0.2 <= j_drop <= 0.4
    assert 0.4 <= l_drop <= 0.6
    assert np.all(np.diff(gad.column("L_tilde"))[grid[:-1] < l_drop] >= 0)


def test_sweep_records_parameters(bell_sweeps):
    res = bell_sweeps["ad_nonmarkov"]
    assert set(res.params) == {"p"}
    assert np.isnan(res.gamma).sum() == 0  # no grid point lands within 1e-6 of a pole
    assert bell_sweeps["gad"].gamma is None
    assert set(bell_sweeps["gad"].params) == {"s", "r"}


def test_sweep_samples_view():
    grid = time_grid(0.5, 0.1)
    samples = sweep(bell_state(), GeneralizedAmplitudeDamping(5.0), grid)
    assert len(samples) == grid.size
    assert all(isinstance(s, ScenarioSample) for s in samples)
    assert [s.t for s in samples] == list(grid)
    assert isinstance(samples[2].diagram, EntropyDiagram)
    assert samples[0].params == {"s": 1.0, "r": 1.0}
    ad = sweep(bell_state(), NONMARKOV, grid)
    assert ad[0].gamma_t == 0.0 and "p" in ad[0].params


def test_sweep_is_deterministic():
    fam, grid = SCENARIOS["gad"]
    a = sweep_arrays(bell_state(), fam, grid).column("delta")
    b = sweep_arrays(bell_state(), fam, grid).column("delta")
    assert np.array_equal(a, b)


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError, match="uniform"):
        sweep_arrays(bell_state(), NONMARKOV, [0.0, 0.1, 0.25])
    with pytest.raises(ValueError):
        sweep_arrays(bell_state(), NONMARKOV, [0.0])


def test_sweep_reports_offending_time():
    class Broken:
        kind = "broken"
        n_kraus = 2

        def kraus(self, t):
            ops = NONMARKOV.kraus(t)
            t = np.asarray(t)
            ops = ops * np.where(np.isclose(t, 0.3), 1.1, 1.0)[..., None, None, None]
            return ops

        def parameters(self, t):
            return {}

    with pytest.raises(ScenarioError) as info:
        sweep_arrays(bell_state(), Broken(), time_grid(0.5, 0.1))
    assert info.value.t == pytest.approx(0.3)


def test_describe():
    assert describe(NONMARKOV) == {"channel": "ad", "gamma0": 1.0, "lam": 0.1}
    assert describe(GeneralizedAmplitudeDamping(5.0)) == {"channel": "gad", "omega": 5.0}
