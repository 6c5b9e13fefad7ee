import numpy as np
import pytest

from epmatch.dynamics import ReducedState
from epmatch.integrate import IntegratorConfig
from epmatch.scenarios import (
    CSV_HEADER,
    Scenario,
    Trajectory,
    compare_trajectories,
    free_fall_fit,
    initial_gamma,
    modified_gravity,
    pendulum_rhs,
    scenario_heavy_top,
    scenario_spherical_pendulum,
    simulate,
    simulate_pendulum,
)
from epmatch.integrate import block_coefficients
from epmatch._pykernels import rhs_block


def test_initial_gamma_value():
    assert np.allclose(initial_gamma(), [0.110616, 0.110616, 0.987688], atol=5e-7)
    assert np.linalg.norm(initial_gamma()) == pytest.approx(1.0, abs=1e-15)


def test_scenario_parameters():
    sp = scenario_spherical_pendulum()
    assert (sp.params.m, sp.params.M, sp.params.l, sp.params.grav) == (0.14, 0.44, 0.215, 9.8)
    assert sp.params.degenerate and sp.t_end == 20.0
    assert sp.rho == pytest.approx(0.126)
    assert sp.gains.k == pytest.approx(-0.454)
    ht = scenario_heavy_top()
    assert ht.params.inertia == (0.2, 0.2, 0.24) and ht.params.m == 0.7
    assert ht.rho == pytest.approx(0.101927, abs=1e-6)
    assert ht.t_end == 30.0
    assert np.array_equal(ht.initial.omega, [0.1, 0.2, 0.1])


def test_scenario_validation():
    sp = scenario_spherical_pendulum()
    with pytest.raises(ValueError):
        sp.with_(mode="bogus")
    with pytest.raises(ValueError):
        sp.with_(initial=ReducedState(np.zeros(3), np.zeros(3), np.array([0, 0, 2.0]), 0.0))
    assert sp.with_(mode="potential").mode == "potential_only"


def test_rows_and_grid():
    tr = simulate(scenario_spherical_pendulum(), IntegratorConfig(dt=1e-3, t_end=20.0))
    assert len(tr.t) == 20001
    assert np.allclose(np.diff(tr.t), 1e-3)
    assert tr.dt == pytest.approx(1e-3)


def test_csv_round_trip(tmp_path):
    tr = simulate(scenario_heavy_top(), IntegratorConfig(t_end=0.05))
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    back = Trajectory.from_csv(path)
    assert np.array_equal(back.states, tr.states)
    assert np.array_equal(back.u, tr.u)
    assert np.array_equal(back.invariants["C2"], tr.invariants["C2"])


def test_csv_rejects_other_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        Trajectory.from_csv(path)


def test_compare_identical_and_mismatched():
    sc = scenario_spherical_pendulum()
    a = simulate(sc, IntegratorConfig(t_end=0.1))
    assert compare_trajectories(a, a)[0] == 0.0
    b = simulate(sc, IntegratorConfig(t_end=0.2))
    with pytest.raises(ValueError):
        compare_trajectories(a, b)
    c = simulate(sc, IntegratorConfig(dt=2e-3, t_end=0.2))
    with pytest.raises(ValueError):
        compare_trajectories(b, c)


def test_modified_gravity_value():
    p = scenario_spherical_pendulum().params
    assert modified_gravity(0.126, p) == pytest.approx(-88.2, rel=1e-14)
    with pytest.raises(ValueError):
        modified_gravity(p.m, p)


def test_closed_loop_reduces_to_modified_pendulum_pointwise():
    sc = scenario_spherical_pendulum()
    p = sc.params
    c = block_coefficients(p, sc.rho, 0.0)
    g_eff = modified_gravity(sc.rho, p)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        x = np.zeros(10)
        x[0:2] = rng.normal(size=2)
        x[3:6] = rng.normal(size=3)
        gam = rng.normal(size=3)
        x[6:9] = gam / np.linalg.norm(gam)
        d = rhs_block(x, c)
        ref = pendulum_rhs(np.concatenate([x[0:2], x[6:9]]), g_eff, p.l)
        got = np.concatenate([d[0:2], d[6:9]])
        assert np.max(np.abs(got - ref)) < 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_pendulum_trajectory_matches_closed_loop():
    sc = scenario_spherical_pendulum()
    cfg = IntegratorConfig(t_end=5.0)
    dev, per = compare_trajectories(simulate(sc, cfg), simulate_pendulum(sc, cfg), ("omega", "gamma"))
    assert dev < 1e-9


def test_free_fall_detection():
    sc = scenario_spherical_pendulum(mode="none")
    upright = sc.with_(initial=ReducedState(np.zeros(3), np.zeros(3), np.array([0, 0, 1.0]), 0.0))
    tr = simulate(upright, IntegratorConfig(t_end=2.0))
    assert np.allclose(tr.h, -0.5 * 9.8 * tr.t**2, atol=1e-12)
    accel, r2 = free_fall_fit(tr)
    assert accel == pytest.approx(-9.8, rel=1e-10) and r2 > 0.999999


def test_potential_only_mode_logs_gravity_compensation():
    sc = scenario_spherical_pendulum(mode="potential_only")
    tr = simulate(sc, IntegratorConfig(t_end=1.0))
    assert np.allclose(tr.u, sc.params.m_bar * sc.params.grav * tr.gamma)
    assert tr.drift("E0") < 1e-8


def test_drift_of_zero_invariant_is_absolute():
    tr = Trajectory(np.arange(3.0), np.zeros((3, 10)), np.zeros((3, 3)), {"q": np.array([0.0, 1e-3, 0.0])})
    assert tr.drift("q") == 1e-3
