import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phase_pump_lab import classical as cl
from phase_pump_lab.errors import (DivergenceError, IntegrationError, NoSaddleError,
                                   RootInIntervalError)
from phase_pump_lab.model import ModelParams, PhasePoint, force

TWO_PI = 2 * math.pi
OMEGA = TWO_PI * 2e-4


def test_relaxes_to_attractive_fixed_point():
    tr = cl.integrate(ModelParams(r=1.0), 0.3, (0.0, 40.0))
    assert abs(tr.phi[-1]) < 1e-6
    assert np.all(np.diff(tr.t) > 0)


def test_arnold_tongue_lock():
    p = ModelParams(r=1.0, delta=0.5)
    tr = cl.integrate(p, 0.0, (0.0, 60.0))
    phi = tr.phi[-1]
    assert abs(abs(math.sin(phi)) - 0.5) < 1e-6
    assert cl.force_dphi(p, phi, 0.0) < 0


def test_theta_follows_omega():
    p = ModelParams(r=0.5, omega=-0.01)
    tr = cl.integrate(p, 0.0, (2.0, 12.0), theta0=1.0)
    assert np.allclose(tr.theta, 1.0 - 0.01 * (tr.t - 2.0))


def test_slips_at_r051_one_per_half_cycle():
    p = ModelParams(r=0.51, omega=OMEGA)
    tr = cl.integrate(p, cl.initial_phase(p), (0.0, TWO_PI / OMEGA))
    thetas = sorted(s.theta for s in tr.slips)
    # the force is invariant under (phi, theta) -> (phi + pi, theta + pi)
    assert len(thetas) == 2
    assert thetas[0] < math.pi <= thetas[1]
    assert all(s.jump > 0 for s in tr.slips)


def test_integration_failure_reports_time(monkeypatch):
    monkeypatch.setattr(cl, "force_scalar", lambda p, phi, th: phi * phi)
    with pytest.raises(IntegrationError) as exc:
        cl.integrate(ModelParams(r=1.0), 1.0, (0.0, 2.0))
    assert 0.9 < exc.value.t_fail <= 1.0


def test_nonpositive_tol_rejected():
    with pytest.raises(ValueError):
        cl.integrate(ModelParams(r=1.0), 0.0, (0.0, 1.0), tol=0.0)


def test_fixed_points_conventional():
    fps = cl.find_fixed_points(ModelParams(r=1.0), 0.0)
    assert [round(f.phi0, 12) for f in fps] == [0.0, round(math.pi, 12)]
    assert [f.stability for f in fps] == ["attractive", "repulsive"]


@pytest.mark.parametrize("theta", [0.0, 1.3, 4.0])
def test_fixed_points_pure_overtone(theta):
    fps = cl.find_fixed_points(ModelParams(r=0.0), theta)
    assert np.allclose([f.phi0 for f in fps], np.arange(4) * math.pi / 2, atol=1e-12)
    assert [f.stability for f in fps] == ["attractive", "repulsive"] * 2


def test_no_fixed_points_outside_tongue():
    assert cl.find_fixed_points(ModelParams(r=1.0, delta=2.0), 0.0) == []


def test_time_between_closed_form():
    t = cl.time_between(ModelParams(r=1.0), 0.0, math.pi / 2, math.pi / 4)
    assert t == pytest.approx(math.log(1 / math.tan(math.pi / 8)), abs=1e-8)


def test_time_between_empty_interval():
    assert cl.time_between(ModelParams(r=1.0), 0.0, math.pi / 2, math.pi / 2) == 0.0


def test_time_between_diverges_at_root():
    with pytest.raises(DivergenceError):
        cl.time_between(ModelParams(r=1.0), 0.0, math.pi / 2, 0.0)


def test_time_between_root_inside():
    with pytest.raises(RootInIntervalError):
        cl.time_between(ModelParams(r=1.0), 0.0, -0.5, 0.5)


def test_time_between_sign_marks_allowed_motion():
    p = ModelParams(r=1.0)
    assert cl.time_between(p, 0.0, 1.0, 0.5) > 0
    assert cl.time_between(p, 0.0, 0.5, 1.0) < 0


def test_saddle_forward_sweep_slips_positive():
    p = ModelParams(r=0.51, omega=OMEGA)
    sc = cl.classify_saddle(p, PhasePoint(0.9, 2.1))
    assert sc.kind == "annihilation"
    assert sc.slip_direction == "positive"
    assert force(p, sc.phi0, sc.theta0) == pytest.approx(0.0, abs=1e-12)
    assert sc.t0 == pytest.approx(sc.theta0 / OMEGA)


def test_no_saddle_below_transition():
    p = ModelParams(r=0.49, omega=OMEGA)
    for th in np.linspace(0, TWO_PI, 9):
        with pytest.raises(NoSaddleError):
            cl.classify_saddle(p, PhasePoint(0.9, th))
    assert cl.find_saddles(p) == []


def test_mirrored_field_flips_direction():
    p = ModelParams(r=0.51, omega=OMEGA)
    sc = cl.classify_saddle(p, PhasePoint(0.9, 2.1))

    # equation of motion for psi = -phi
    def mirrored(psi, th):
        return -force(p, -psi, th)

    sm = cl.classify_saddle(p, PhasePoint(-0.9, 2.1), field=mirrored)
    assert sm.slip_direction == "negative"
    assert sm.a == pytest.approx(-sc.a, rel=1e-3)


def test_marginal_classification():
    sc = cl.SaddleClassification(t0=0.0, theta0=0.0, phi0=0.0, a=1e-8, b=1.0,
                                 kind="annihilation")
    assert sc.slip_direction == "marginal"


@pytest.mark.parametrize("r, expected", [(1.0, 1), (0.0, 0), (0.49, 0), (0.51, 1)])
def test_winding_examples(r, expected):
    res = cl.winding(ModelParams(r=r, omega=OMEGA))
    assert res.chi == pytest.approx(expected, abs=1e-6)
    assert res.method == "classical"
    assert res.cycles_used == 2


def test_backward_winding_negative():
    assert cl.winding(ModelParams(r=0.7, omega=-OMEGA)).chi == pytest.approx(-1, abs=1e-6)


def test_winding_needs_modulation():
    with pytest.raises(ValueError):
        cl.winding(ModelParams(r=0.7))


def test_winding_convergence_estimate_multi_cycle():
    res = cl.winding(ModelParams(r=0.8, omega=OMEGA), settle_cycles=0, measure_cycles=3)
    assert res.convergence_estimate < 1e-4


@settings(max_examples=8, deadline=None)
@given(st.one_of(st.floats(0.0, 0.48), st.floats(0.52, 1.0)))
def test_winding_is_integer(r):
    chi = cl.winding(ModelParams(r=r, omega=OMEGA)).chi
    assert abs(chi - round(chi)) < 1e-4


@pytest.mark.parametrize("r", [0.1, 0.3, 0.49])
def test_adiabatic_tracking_below_transition(r):
    p = ModelParams(r=r, omega=OMEGA)
    tr = cl.integrate(p, cl.initial_phase(p), (0.0, TWO_PI / OMEGA))
    roots = [cl.stable_root_near(p, a, b) for a, b in zip(tr.phi, tr.theta)]
    assert not np.any(np.isnan(roots))
    assert np.max(np.abs(np.asarray(roots) - tr.phi)) < cl.TRACKING_TOL


@pytest.mark.parametrize("r", [0.51, 0.55, 0.6])
def test_slip_consistency(r):
    pair = cl.hysteresis_pair(ModelParams(r=r, omega=OMEGA))
    for tr in pair:
        events = [s for s in cl.find_saddles(tr.params) if s.kind == "annihilation"]
        assert tr.slips
        for slip in tr.slips:
            gaps = [abs(cl._angle_diff(slip.theta_onset, s.theta0)) for s in events]
            near = events[int(np.argmin(gaps))]
            assert min(gaps) <= 0.05
            assert near.slip_direction == ("positive" if slip.jump > 0 else "negative")


def test_retrace_below_transition():
    pair = cl.hysteresis_pair(ModelParams(r=0.49, omega=OMEGA))
    assert pair.forward.slips == [] and pair.backward.slips == []
    assert pair.branch_difference() < 1e-4


def test_hysteresis_above_transition():
    pair = cl.hysteresis_pair(ModelParams(r=0.51, omega=OMEGA))
    assert pair.slip_gap() >= 0.1
    assert pair.branch_difference() > 0.1


def test_same_start_pair_matches_chained_up_to_translation():
    p = ModelParams(r=0.51, omega=OMEGA)
    a = cl.hysteresis_pair(p)
    b = cl.hysteresis_pair(p, chained=False)
    assert b.backward.theta[0] == 0.0
    assert a.branch_difference() == pytest.approx(b.branch_difference(), abs=1e-9)
    assert sorted(a.slip_theta_bwd) == pytest.approx(sorted(b.slip_theta_bwd), abs=1e-6)


def test_non_reciprocity_lattice_translation():
    p = ModelParams(r=0.55, mu=0.1, delta=TWO_PI * 0.004, omega=OMEGA)
    net = cl.hysteresis_pair(p).net_displacement()
    n = round(net / TWO_PI)
    assert n != 0
    assert abs(net - TWO_PI * n) < 0.05


def test_detect_slips_on_synthetic_step():
    theta = np.linspace(0, 1, 1001)
    phi = np.where(theta < 0.5, 0.0, 2.0)
    ev = cl.detect_slips(theta, theta, phi)
    assert len(ev) == 1
    assert ev[0].jump == pytest.approx(2.0)
    assert ev[0].theta == pytest.approx(0.499, abs=2e-3)
