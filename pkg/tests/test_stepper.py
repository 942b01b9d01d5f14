import numpy as np
import pytest

from nschemo.diagnostics import energy
from nschemo.grid import Grid, MacVelocity, ScalarField, divergence, face_l2_sq, kinetic_energy
from nschemo import kernels
from nschemo.potential import Potential
from nschemo.stepper import (
    ConfigError,
    PhysParams,
    SolverAbort,
    SourceSpec,
    Stepper,
    StepperConfig,
    ch_substep,
    default_dt,
    make_state,
    ns_substep,
    nutrient_substep,
    step,
)

G = Grid(16, 16)


def smooth(g, amp=0.05, mean=0.0):
    x, y = g.cell_centers()
    return mean + amp * np.cos(np.pi * x) * np.cos(2 * np.pi * y)


def vortex(g, amp=0.1):
    return MacVelocity.from_streamfunction(g, lambda x, y: amp * np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2)


def test_params_validation():
    for kw in ({"A": 0.0}, {"B": -1.0}, {"alpha": -0.1}, {"c0": 1.5}, {"eta1": 0.0}, {"h_kind": "cubic"}):
        with pytest.raises(ConfigError):
            PhysParams(**kw)
    with pytest.raises(ConfigError, match="H5"):
        PhysParams(c0=1.5)


def test_config_validation():
    with pytest.raises(ConfigError):
        StepperConfig(dt=0.0)
    with pytest.raises(ConfigError):
        StepperConfig(coupling="picard", picard_kmax=0)
    with pytest.raises(ConfigError):
        StepperConfig(cfl_max=1.5)


def test_interpolations():
    p = PhysParams(eta1=1.0, eta2=2.0)
    assert p.eta(0.0) == 1.5
    assert p.eta(1.0) == 1.0 and p.eta(-1.0) == 2.0
    assert p.h(0.0) == 0.5 and p.h(-1.0) == 0.0 and p.h(1.0) == 1.0


def test_default_dt():
    assert default_dt(G, PhysParams(B=1e-2)) == pytest.approx(0.1 * (1 / 16) ** 2 / 1e-2)


def test_source_kinds():
    assert not np.any(SourceSpec().evaluate(G, 1.0))
    s = SourceSpec("constant", value=2.0, decay=1.0)
    assert s.evaluate(G, 0.0)[0, 0] == 2.0
    assert s.evaluate(G, 1.0)[3, 3] == pytest.approx(2.0 * np.exp(-1.0))
    tab = SourceSpec("tabulated", times=[0.0, 1.0], table=[0.0, 4.0])
    assert tab.evaluate(G, 0.25)[0, 0] == pytest.approx(1.0)
    assert tab.evaluate(G, 5.0)[0, 0] == 4.0
    gs = SourceSpec("gaussian", amplitude=1.0, center=(0.5, 0.5), width=0.1)
    vals = gs.evaluate(G, 0.0)
    assert vals.max() == vals[7, 7] or vals.max() == vals[8, 8]
    with pytest.raises(ConfigError):
        SourceSpec("tabulated", times=[1.0, 0.0], table=[0.0, 1.0])
    with pytest.raises(ConfigError):
        SourceSpec("constant", decay=-1.0)


@pytest.mark.parametrize("alpha", [0.0, 3.0])
def test_constant_state_is_ch_fixed_point(alpha):
    prm = PhysParams(alpha=alpha, c0=0.3, potential=Potential("logarithmic", 0.8, 1.0))
    st = make_state(G, np.full(G.shape, 0.3), params=prm)
    phi, mu = ch_substep(st, prm, 1e-2)
    np.testing.assert_allclose(phi.values, 0.3, rtol=0, atol=1e-14)
    np.testing.assert_allclose(mu.values, prm.A * prm.potential.psi_prime(0.3), rtol=1e-12)


def test_mean_recurrence_single_step():
    prm = PhysParams(B=1e-2, alpha=1.0, c0=0.0)
    st = make_state(G, smooth(G, 0.1, mean=0.2), params=prm)
    phi, _ = ch_substep(st, prm, 0.1, StepperConfig(dt=0.1, newton_tol=1e-12))
    assert (phi.mean() - 0.0) == pytest.approx(0.2 / 1.1, rel=1e-12)


def test_ch_lyapunov_decrease():
    prm = PhysParams(B=1e-2, chi=0.0, alpha=0.0)
    rng = np.random.default_rng(1)
    st = make_state(G, rng.uniform(-0.05, 0.05, G.shape), params=prm)

    def ch_energy(phi):
        gx, gy = kernels.grad_x(phi, G.hx), kernels.grad_y(phi, G.hy)
        return prm.A * np.sum(prm.potential.psi(phi)) * G.cell_area + 0.5 * prm.B * face_l2_sq(gx, gy, G)

    e_prev = ch_energy(st.phi.values)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-3))
    for _ in range(5):
        phi, mu, _ = stepper.ch_substep(st, 1e-3)
        e = ch_energy(phi)
        assert e <= e_prev
        e_prev = e
        st = make_state(G, phi, params=prm)


def test_ch_iterates_stay_inside():
    prm = PhysParams(B=1e-3, chi=0.0)
    rng = np.random.default_rng(2)
    st = make_state(G, rng.uniform(-0.95, 0.95, G.shape), params=prm)
    phi, _ = ch_substep(st, prm, 5e-2)
    assert np.max(np.abs(phi.values)) < 1.0
    assert prm.potential.clamp_events == 0


def test_nutrient_pure_diffusion_l2_nonincreasing():
    prm = PhysParams()
    rng = np.random.default_rng(3)
    sig = rng.standard_normal(G.shape)
    st = make_state(G, np.zeros(G.shape), sig, params=prm)
    new = nutrient_substep(st, st.phi, prm, 1e-3)
    assert np.sum(new.values**2) <= np.sum(sig**2)


@pytest.mark.parametrize("lam", [0.0, 0.7, -2.0])
def test_nutrient_mean_unit_source(lam):
    prm = PhysParams(chi=0.5, lam=lam, source=SourceSpec("constant", value=1.0))
    rng = np.random.default_rng(4)
    st = make_state(G, 0.3 * rng.uniform(-1, 1, G.shape), rng.random(G.shape), params=prm)
    dt = 1e-3
    phi_new = smooth(G, 0.2)
    new = nutrient_substep(st, phi_new, prm, dt)
    assert new.mean() - st.sigma.mean() == pytest.approx(dt, rel=1e-12)


def test_nutrient_mean_with_consumption():
    prm = PhysParams(consumption=2.0, source=SourceSpec("constant", value=0.5))
    rng = np.random.default_rng(5)
    st = make_state(G, np.zeros(G.shape), rng.random(G.shape), params=prm)
    dt = 1e-2
    phi_new = smooth(G, 0.5)
    new = nutrient_substep(st, phi_new, prm, dt).values
    pred = st.sigma.mean() + dt * (0.5 - 2.0 * np.mean(prm.h(phi_new) * new))
    assert new.mean() == pytest.approx(pred, rel=1e-12)


def test_ns_zero_forcing_keeps_rest():
    prm = PhysParams()
    st = make_state(G, np.zeros(G.shape), params=prm)
    v, p = ns_substep(st, st.phi, st.mu, st.sigma, prm, 1e-3)
    assert not np.any(v.u) and not np.any(v.w)
    assert np.ptp(p.values) == 0.0


def test_viscous_decay_of_vortex():
    prm = PhysParams(eta1=1.0, eta2=2.0, B=1e-2)
    st = make_state(G, np.zeros(G.shape), v=vortex(G), params=prm)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-3))
    ke = kinetic_energy(st.v)
    for _ in range(5):
        st, info, _ = stepper.step(st)
        assert kinetic_energy(st.v) < ke
        assert divergence(st.v).max_abs() <= stepper.cfg.projection_tol
        ke = kinetic_energy(st.v)


def test_zero_state_is_fixed_point():
    prm = PhysParams(chi=0.5)
    st0 = make_state(G, np.zeros(G.shape), params=prm)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-2))
    st = st0
    for _ in range(3):
        st, _, _ = stepper.step(st)
    for a, b in ((st.phi, st0.phi), (st.sigma, st0.sigma), (st.mu, st0.mu)):
        np.testing.assert_array_equal(a.values, b.values)
    assert not np.any(st.v.u) and not np.any(st.v.w)
    assert st.t == pytest.approx(3e-2) and st.step_index == 3


def _busy_state(prm):
    rng = np.random.default_rng(6)
    return make_state(G, rng.uniform(-0.3, 0.3, G.shape), rng.random(G.shape), vortex(G, 0.05), prm)


def test_picard_single_pass_equals_sequential():
    prm = PhysParams(chi=0.5, B=1e-2, alpha=0.3, eta2=3.0)
    st = _busy_state(prm)
    a = step(st, prm, StepperConfig(dt=1e-3))
    b = step(st, prm, StepperConfig(dt=1e-3, coupling="picard", picard_kmax=1))
    for x, y in ((a.phi, b.phi), (a.sigma, b.sigma), (a.mu, b.mu), (a.p, b.p)):
        np.testing.assert_array_equal(x.values, y.values)
    np.testing.assert_array_equal(a.v.u, b.v.u)


def test_picard_iterations_converge():
    prm = PhysParams(chi=0.5, B=1e-2, eta2=3.0)
    st = _busy_state(prm)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-3, coupling="picard", picard_kmax=8, picard_tol=1e-9))
    new, info, _ = stepper.step(st)
    assert 1 < info.picard_iters < 8
    assert divergence(new.v).max_abs() <= 1e-9


def test_full_step_postconditions():
    prm = PhysParams(chi=0.5, B=1e-2, alpha=0.5, c0=0.1, eta2=2.0, source=SourceSpec("constant", value=0.3))
    st = _busy_state(prm)
    new, info, dt = Stepper(G, prm, StepperConfig(dt=1e-3)).step(st)
    assert (new.phi.mean() - 0.1) * (1 + 0.5 * dt) == pytest.approx(st.phi.mean() - 0.1, rel=1e-12)
    assert new.sigma.mean() - st.sigma.mean() == pytest.approx(dt * 0.3, rel=1e-10)
    assert info.div_max <= 1e-9 and info.clamp_events == 0
    assert np.max(np.abs(new.phi.values)) < 1.0
    # mu is consistent with the split chemical potential
    mu = (
        prm.A * prm.potential.psi0_prime(new.phi.values)
        - prm.A * prm.potential.theta0 * st.phi.values
        - prm.B * kernels.laplacian(new.phi.values, G.hx, G.hy)
        - prm.chi * st.sigma.values
    )
    np.testing.assert_allclose(new.mu.values, mu, atol=1e-8)


def test_energy_decreases_without_work():
    prm = PhysParams(chi=0.5, B=1e-2, eta2=2.0)
    rng = np.random.default_rng(8)
    st = make_state(G, rng.uniform(-0.05, 0.05, G.shape), params=prm)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-3))
    e = energy(st, prm)
    for _ in range(10):
        st, _, _ = stepper.step(st)
        e_new = energy(st, prm)
        assert e_new - e <= 1e-8 * (1 + abs(e))
        e = e_new


def test_cfl_halving():
    prm = PhysParams(B=1e-2)
    st = make_state(G, np.zeros(G.shape), v=vortex(G, 50.0), params=prm)
    stepper = Stepper(G, prm, StepperConfig(dt=1e-2, adapt_dt=True, cfl_max=0.5))
    _, _, dt = stepper.step(st)
    assert dt < 1e-2


def test_rejection_without_adaptivity_aborts():
    prm = PhysParams(B=1e-3)
    rng = np.random.default_rng(9)
    st = make_state(G, rng.uniform(-0.9, 0.9, G.shape), params=prm)
    with pytest.raises(SolverAbort) as exc:
        Stepper(G, prm, StepperConfig(dt=1.0, newton_max=1, newton_tol=1e-14)).step(st)
    assert exc.value.state is st


def test_rejection_below_dt_min_aborts_with_dump():
    prm = PhysParams(B=1e-3)
    rng = np.random.default_rng(9)
    st = make_state(G, rng.uniform(-0.9, 0.9, G.shape), params=prm)
    cfg = StepperConfig(dt=1.0, newton_max=1, newton_tol=1e-14, adapt_dt=True, dt_min=0.1)
    with pytest.raises(SolverAbort) as exc:
        Stepper(G, prm, cfg).step(st)
    assert exc.value.dump["dt"] < 0.1


def test_make_state_mu():
    prm = PhysParams(chi=2.0)
    st = make_state(G, 0.0, 1.0, params=prm)
    np.testing.assert_allclose(st.mu.values, -2.0)
    assert isinstance(st.p, ScalarField) and st.t == 0.0
