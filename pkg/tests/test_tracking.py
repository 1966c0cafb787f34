import math

import numpy as np
import pytest

from uavcomp.errors import ConfigError
from uavcomp.formation import CASE_ADJACENCY, CASE_PINNING, SwarmParams, SwarmState
from uavcomp.tracking import (
    CASE_BOUNDS,
    DynamicsBounds,
    ImpulsiveParams,
    TargetModel,
    TargetState,
    TrackingScenario,
    apply_impulse,
    control_strength,
    inside_q0,
    run_tracking_case,
    simulate_tracking,
    step_between_impulses,
    theorem2_check,
    tracking_case_study,
    tracking_lambda_term,
)

STILL = TargetState(np.zeros(3), np.zeros(3))


def _swarm(dynamics="zero", gain=0.002, offsets=None):
    off = np.zeros((3, 3)) if offsets is None else offsets
    return SwarmParams(CASE_ADJACENCY, CASE_PINNING, ((0.0, gain),), off, dynamics)


class TestControlStrength:
    def test_half_for_double_gap(self):
        assert control_strength([[10.0, 0, 0]], [[0.0, 0, 0]], (5, 5, 5), (5, 5, 5)) == 0.5

    def test_min_over_axes_and_agents(self):
        gx = [[10.0, 0, 0], [0, 0, 25.0]]
        gv = [[0.0, 8.0, 0], [0, 0, 0]]
        assert control_strength(gx, gv, (5, 5, 5), (4, 4, 4)) == pytest.approx(0.2)

    def test_inside_agents_ignored(self):
        gx = [[10.0, 0, 0], [0, 0, 100.0]]
        zeros = np.zeros((2, 3))
        assert control_strength(gx, zeros, (5, 5, 5), (5, 5, 5), inside=[False, True]) == 0.5

    def test_all_inside(self):
        assert control_strength([[50.0, 0, 0]], [[0, 0, 0]], (5, 5, 5), (5, 5, 5), inside=[True]) == 0.0

    def test_clamped_to_one(self):
        assert control_strength([[1.0, 0, 0]], [[0.5, 0, 0]], (5, 5, 5), (5, 5, 5)) == 1.0

    def test_zero_gap_no_limit(self):
        assert control_strength(np.zeros((2, 3)), np.zeros((2, 3)), (5, 5, 5), (5, 5, 5)) == 1.0


class TestApplyImpulse:
    def _setup(self):
        off = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
        rng = np.random.default_rng(0)
        X = rng.normal(size=(4, 3))
        V = rng.normal(size=(4, 3))
        ref = TargetState(np.array([0.5, -0.5, 0.2]), np.array([1.0, 0.0, 0.0]))
        return X, V, off, ref

    def test_zero_strength_is_identity(self):
        X, V, off, ref = self._setup()
        Xn, Vn, dx, dv = apply_impulse(X, V, off, ref, 0.0, (5, 5, 5), (5, 5, 5))
        assert np.array_equal(Xn, X) and np.array_equal(Vn, V)
        assert not np.any(dx) and not np.any(dv)

    def test_full_strength_lands_on_slots(self):
        X, V, off, ref = self._setup()
        Xn, Vn, _, _ = apply_impulse(X, V, off, ref, 1.0, (50, 50, 50), (50, 50, 50))
        slots = np.vstack([np.zeros(3), off]) + ref.pos
        assert np.allclose(Xn, slots, atol=1e-14)
        assert np.allclose(Vn, ref.vel, atol=1e-14)

    def test_half_strength_halves_error(self):
        X, V, off, ref = self._setup()
        Xn, _, _, _ = apply_impulse(X, V, off, ref, 0.5, (50, 50, 50), (50, 50, 50))
        slots = np.vstack([np.zeros(3), off]) + ref.pos
        assert np.allclose(Xn - slots, 0.5 * (X - slots), atol=1e-14)

    def test_limit_violation(self):
        X = np.array([[100.0, 0, 0]] * 4)
        with pytest.raises(AssertionError):
            apply_impulse(X, np.zeros((4, 3)), np.zeros((3, 3)), STILL, 1.0, (5, 5, 5), (5, 5, 5))

    def test_strength_keeps_jumps_within_limits(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            X, V = rng.normal(scale=30, size=(4, 3)), rng.normal(scale=10, size=(4, 3))
            off = rng.normal(scale=20, size=(3, 3))
            ex = X - np.vstack([np.zeros(3), off])
            ell = control_strength(ex, V, (5, 5, 5), (3, 3, 3))
            apply_impulse(X, V, off, STILL, ell, (5, 5, 5), (3, 3, 3))


class TestQ0:
    def test_modes(self):
        X = np.array([[3.0, 0, 0], [30.0, 0, 0], [0, 1, 0], [0, 0, 0]])
        V = np.array([[20.0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0]])
        off = np.zeros((3, 3))
        ue = np.zeros(3)
        assert list(inside_q0(X, V, off, STILL, ue, 10.0, "slot_position")) == [True, False, True, True]
        assert list(inside_q0(X, V, off, STILL, ue, 10.0, "slot_state")) == [False, False, True, True]
        assert list(inside_q0(X, V, off, STILL, ue + [25, 0, 0], 10.0, "ue_distance")) == [False, True, False, False]

    def test_inside_agent_not_moved_in_simulation(self):
        # everyone already sits in its slot: impulses leave the state alone
        p = _swarm()
        imp = ImpulsiveParams(q0_mode="slot_state")
        target = TargetModel("waypoint_path", np.array([[0.0, 0, 0], [1.0, 0, 0]]), 1e-9)
        init = SwarmState(0.0, np.zeros(3), np.zeros(3), np.zeros((3, 3)), np.zeros((3, 3)))
        r = simulate_tracking(p, imp, target, init, 0.2, 0.01)
        assert all(rec.ell == 0.0 for rec in r.impulses)


class TestGainConditionReport:
    def test_case_values(self):
        params, imp, _, _ = tracking_case_study()
        rep = theorem2_check(params, imp, CASE_BOUNDS)
        assert rep.eta == pytest.approx(23.0095, abs=5e-4)
        assert rep.lambda_term == pytest.approx(rep.eta - 22.0, rel=1e-12)
        assert rep.beta == (0.5,)
        assert rep.condition_values[0] == pytest.approx(rep.eta * 0.02 + math.log(1.3 * 0.5), rel=1e-12)
        assert rep.condition_values[0] > 0 and not rep.satisfied
        assert rep.rho_sup == pytest.approx(math.exp(-rep.eta * 0.02) / 0.5, rel=1e-12)
        # the default ρ is above the largest admissible value at these η and β
        assert not rep.rho_consistent
        assert "INCONSISTENT" in rep.summary()

    def test_lambda_term_against_numpy(self):
        c = 0.37
        L = np.diag(CASE_ADJACENCY.sum(1)) - CASE_ADJACENCY
        G = np.block([[np.zeros((3, 3)), np.eye(3)], [c * L, c * L]])
        assert tracking_lambda_term(CASE_ADJACENCY, c) == pytest.approx(np.linalg.eigvalsh(G + G.T)[-1], rel=1e-12)

    def test_zero_strength_fails(self):
        params, imp, _, _ = tracking_case_study()
        rep = theorem2_check(params, imp, CASE_BOUNDS, ells=[0.0, 0.5])
        assert rep.beta == (1.0, 0.5)
        assert not rep.satisfied

    def test_full_strength(self):
        params, imp, _, _ = tracking_case_study()
        rep = theorem2_check(params, imp, CASE_BOUNDS, ells=[1.0])
        assert rep.condition_values[0] == -math.inf and rep.satisfied

    def test_admissible_radius_without_acceleration(self):
        params = _swarm()
        imp = ImpulsiveParams(tau=0.5, q0_radius=4.0)
        rep = theorem2_check(params, imp, DynamicsBounds(0.0, 0.0, 0.0), epsilon=0.25)
        assert rep.R_Q == pytest.approx(4.0 * 1.5 + 0.25)

    def test_admissible_radius_case(self):
        params, imp, _, _ = tracking_case_study()
        assert theorem2_check(params, imp, CASE_BOUNDS).R_Q == pytest.approx(10.22)


class TestTarget:
    def test_zigzag_corners(self):
        tg = TargetModel.zigzag()
        assert np.allclose(tg.at(20.0).pos, [200, 0, 0])
        assert np.allclose(tg.at(22.0).pos, [200, 20, 0])
        assert np.allclose(tg.at(22.0).vel, [0, 10, 0])
        assert np.allclose(tg.at(27.0).pos, [220, 50, 0])

    def test_ode_target_matches_closed_form(self):
        g = lambda t, x, v: np.zeros(3)  # noqa: E731
        tg = TargetModel("dynamics", g=g, x0=[1.0, 2.0, 0.0], v0=[3.0, 0.0, 0.0])
        st = tg.initial()
        for k in range(10):
            st = tg.advance(st, 0.1 * k, 0.1)
        assert np.allclose(st.pos, [4.0, 2.0, 0.0])

    def test_lift(self):
        tg = TargetModel.zigzag(lift=150.0)
        assert tg.reference(tg.initial()).pos[2] == 150.0

    @pytest.mark.parametrize(
        "kw",
        [
            {"kind": "spiral"},
            {"kind": "waypoint_path"},
            {"kind": "waypoint_path", "points": [[0, 0], [0, 0]]},
            {"kind": "waypoint_path", "points": [[0, 0], [1, 0]], "speed": 0.0},
            {"kind": "dynamics"},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            TargetModel(**kw)


class TestImpulsiveParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"tau": 0.0},
            {"rho": 1.0},
            {"q0_radius": -1.0},
            {"delta_x_max": (1.0, 2.0)},
            {"q0_mode": "nearest"},
            {"impulse_times": (0.5, 0.4)},
            {"tau": 0.1, "impulse_times": (0.1, 0.3)},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ImpulsiveParams(**kw)

    def test_dt_must_divide_tau(self):
        params, imp, target, init = tracking_case_study()
        with pytest.raises(ConfigError):
            simulate_tracking(params, imp, target, init, 1.0, 0.03)


class TestSimulation:
    def test_static_target_in_formation(self):
        off = np.array([[5.0, 0, 0], [0, 5.0, 0], [0, 0, 5.0]])
        p = _swarm(offsets=off)
        target = TargetModel("dynamics", g=lambda t, x, v: np.zeros(3), x0=[10.0, 10.0, 0.0], v0=np.zeros(3))
        init = SwarmState(0.0, np.array([10.0, 10, 0]), np.zeros(3), np.array([10.0, 10, 0]) + off, np.zeros((3, 3)))
        r = simulate_tracking(p, ImpulsiveParams(), target, init, 1.0, 0.01)
        assert np.max(np.abs(r.zeta_x)) == 0.0 and np.max(np.abs(r.zeta_v)) == 0.0

    def test_ballistic_without_coupling(self):
        adj = np.zeros((3, 3))
        p = SwarmParams(adj, np.ones(3), ((0.0, 1.0),), np.zeros((3, 3)), "zero")
        imp = ImpulsiveParams(tau=100.0)  # no impulse inside the horizon
        v = np.array([[1.0, 2.0, 0.0], [0, -1, 0], [3, 0, 1]])
        init = SwarmState(0.0, np.zeros(3), np.array([0.5, 0, 0]), np.zeros((3, 3)), v)
        r = simulate_tracking(p, imp, TargetModel.zigzag(), init, 2.0, 0.01, stride=200)
        assert np.allclose(r.positions[-1, 1:], 2.0 * v, atol=1e-12)
        assert np.allclose(r.positions[-1, 0], [1.0, 0, 0], atol=1e-12)

    def test_step_rk4_order(self):
        params, _, target, init = tracking_case_study()
        p = _swarm("case_study", gain=0.5, offsets=params.formation_offsets)

        def run(dt):
            s, tg = init, target.initial()
            for _ in range(int(round(8.0 / dt))):
                s, tg = step_between_impulses(s, p, target, tg, dt)
            return s.follower_pos

        ref = run(0.0125)
        e1 = np.abs(run(0.2) - ref).max()
        e2 = np.abs(run(0.1) - ref).max()
        assert 12 < e1 / e2 < 20

    def test_impulse_log_and_flags(self, tmp_path):
        params, imp, target, init = tracking_case_study()
        r = simulate_tracking(params, imp, target, init, 0.1, 0.01)
        assert r.impulse_flags.sum() == 5
        assert len(r.impulses) == 5 * 4
        r.write_impulse_csv(tmp_path / "imp.csv")
        assert len((tmp_path / "imp.csv").read_text().splitlines()) == 21
        r.write_csv(tmp_path / "traj.csv")
        assert (tmp_path / "traj.csv").read_text().splitlines()[0].endswith(",impulse")

    def test_explicit_impulse_times(self):
        params, _, target, init = tracking_case_study()
        imp = ImpulsiveParams(tau=0.05, impulse_times=(0.03, 0.05, 0.1))
        r = simulate_tracking(params, imp, target, init, 0.2, 0.01)
        assert list(np.round(r.times[r.impulse_flags], 6)) == [0.03, 0.05, 0.1]

    def test_case_study_tracks(self):
        r = run_tracking_case(TrackingScenario(t_end=30.0))
        assert r.completed
        assert r.report is not None
        late = r.times >= 1.0
        assert np.max(np.linalg.norm(r.zeta_x[late], axis=2)) < 0.1
        assert r.max_agent_error == pytest.approx(np.max(np.linalg.norm(r.zeta_x[0], axis=1)))
