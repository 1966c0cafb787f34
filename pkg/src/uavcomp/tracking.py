"""Impulsive formation tracking of a moving UE.

Between impulse instants the leader flies open loop and the followers only
run consensus among themselves (no pinning).  At every ``t_k`` each agent
outside the initial set Q0 jumps toward its slot around the target by a
fraction ``ℓ`` of its error, where ``ℓ`` is chosen so that no jump exceeds the
per-axis limits.  ``theorem2_check`` evaluates the sufficient condition
``η Δt_k + ln(ρ β_k) < 0`` together with the admissible-set radius R_Q.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, NumericError
from .formation import (
    CASE_ADJACENCY,
    CASE_PINNING,
    CRUISE_ALTITUDE,
    SwarmParams,
    SwarmState,
    _rk4,
    _stack,
    jacobi_eigenvalues,
    laplacian,
    resolve_dynamics,
    write_trajectory_csv,
)
from .rng import as_generator

TargetDynamics = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

Q0_MODES = ("slot_state", "slot_position", "ue_distance")


class TargetState(NamedTuple):
    pos: np.ndarray
    vel: np.ndarray


@dataclass(frozen=True)
class TargetModel:
    """Mobile UE motion, either a constant-speed waypoint path or an ODE.

    Positions are on the ground; ``lift`` is added to the z coordinate to get
    the reference point ``x_g`` the swarm tracks.
    """

    kind: str = "waypoint_path"
    points: np.ndarray | None = None
    speed: float = 10.0
    g: TargetDynamics | None = None
    x0: np.ndarray | None = None
    v0: np.ndarray | None = None
    lift: float = 0.0

    def __post_init__(self):
        if self.kind == "waypoint_path":
            if self.points is None:
                raise ConfigError("waypoint_path needs points")
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] not in (2, 3) or len(pts) < 2:
                raise ConfigError("points must be an (k>=2, 2 or 3) array")
            if pts.shape[1] == 2:
                pts = np.column_stack([pts, np.zeros(len(pts))])
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if np.any(seg == 0):
                raise ConfigError("consecutive waypoints must be distinct")
            if not self.speed > 0:
                raise ConfigError("target speed must be positive")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
        elif self.kind == "dynamics":
            if self.g is None or self.x0 is None or self.v0 is None:
                raise ConfigError("dynamics target needs g, x0 and v0")
            object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(3))
            object.__setattr__(self, "v0", np.asarray(self.v0, dtype=float).reshape(3))
        else:
            raise ConfigError(f"unknown target kind {self.kind!r}")

    @classmethod
    def zigzag(cls, speed=10.0, turn_times=(20.0, 25.0), headings_deg=(0.0, 90.0, 0.0), t_end=60.0, lift=0.0):
        """Piecewise-straight path starting at the origin with turns at ``turn_times``."""
        if len(headings_deg) != len(turn_times) + 1:
            raise ConfigError("need one heading per leg")
        bounds = [0.0, *turn_times, max(t_end, turn_times[-1] + 1.0 if turn_times else t_end)]
        pts = [np.zeros(3)]
        for (t0, t1), hd in zip(zip(bounds, bounds[1:]), headings_deg):
            a = math.radians(hd)
            pts.append(pts[-1] + speed * (t1 - t0) * np.array([math.cos(a), math.sin(a), 0.0]))
        return cls("waypoint_path", np.array(pts), speed, lift=lift)

    def _leg_times(self):
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg / self.speed)])

    def initial(self) -> TargetState:
        if self.kind == "dynamics":
            return TargetState(self.x0.copy(), self.v0.copy())
        return self.at(0.0)

    def at(self, t: float) -> TargetState:
        """Closed-form state on a waypoint path; corners use the incoming tangent."""
        if self.kind != "waypoint_path":
            raise ConfigError("closed-form state is only defined for waypoint paths")
        times = self._leg_times()
        if t <= 0:
            k = 0
        else:
            k = int(np.searchsorted(times, t, side="left")) - 1
            k = min(max(k, 0), len(self.points) - 2)
        a, b = self.points[k], self.points[k + 1]
        u = (b - a) / np.linalg.norm(b - a)
        return TargetState(a + u * self.speed * (t - times[k]), u * self.speed)

    def advance(self, st: TargetState, t: float, dt: float) -> TargetState:
        if self.kind == "waypoint_path":
            return self.at(t + dt)
        X, V = _rk4(lambda tt, x, v: (v, self.g(tt, x, v)), t, st.pos, st.vel, dt)
        return TargetState(X, V)

    def reference(self, st: TargetState) -> TargetState:
        return TargetState(st.pos + np.array([0.0, 0.0, self.lift]), st.vel)


@dataclass(frozen=True)
class ImpulsiveParams:
    tau: float = 0.02
    delta_x_max: tuple[float, float, float] = (5.0, 5.0, 5.0)
    delta_v_max: tuple[float, float, float] = (5.0, 5.0, 5.0)
    q0_radius: float = 10.0
    rho: float = 1.3
    impulse_times: tuple[float, ...] | None = None
    q0_mode: str = "slot_state"

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError("impulse interval tau must be positive and finite")
        dx = np.asarray(self.delta_x_max, dtype=float).reshape(-1)
        dv = np.asarray(self.delta_v_max, dtype=float).reshape(-1)
        if dx.shape != (3,) or dv.shape != (3,) or np.any(dx < 0) or np.any(dv < 0):
            raise ConfigError("delta_x_max and delta_v_max must be three non-negative numbers")
        if not self.q0_radius >= 0:
            raise ConfigError("q0_radius must be non-negative")
        if not self.rho > 1:
            raise ConfigError("rho must exceed 1")
        if self.q0_mode not in Q0_MODES:
            raise ConfigError(f"q0_mode must be one of {Q0_MODES}")
        object.__setattr__(self, "delta_x_max", tuple(dx))
        object.__setattr__(self, "delta_v_max", tuple(dv))
        if self.impulse_times is not None:
            tk = tuple(float(t) for t in self.impulse_times)
            if any(b <= a for a, b in zip(tk, tk[1:])) or (tk and tk[0] <= 0):
                raise ConfigError("impulse_times must be positive and strictly increasing")
            gaps = np.diff((0.0,) + tk)
            if np.any(gaps > self.tau * (1 + 1e-12)):
                raise ConfigError("explicit impulse gaps must not exceed tau")
            object.__setattr__(self, "impulse_times", tk)


# ---------------------------------------------------------------------------
# Continuous part


def _tracking_rhs(params: SwarmParams, f, L, t, X, V):
    acc = f(t, X, V).copy()
    xi = X[1:] - params.formation_offsets + V[1:]
    acc[1:] -= params.gain_at(t) * (L @ xi)
    return V, acc


def step_between_impulses(
    state: SwarmState,
    params: SwarmParams,
    target: TargetModel,
    target_state: TargetState,
    dt: float,
) -> tuple[SwarmState, TargetState]:
    """RK4 step of the uncontrolled leader, consensus-coupled followers and target."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = resolve_dynamics(params.dynamics)
    L = laplacian(params.adjacency)
    X, V = _stack(state)
    Xn, Vn = _rk4(lambda t, x, v: _tracking_rhs(params, f, L, t, x, v), state.t, X, V, dt)
    if not (np.all(np.isfinite(Xn)) and np.all(np.isfinite(Vn))):
        raise NumericError(f"tracking state diverged at t={state.t + dt:.4f}")
    return (
        SwarmState(state.t + dt, Xn[0], Vn[0], Xn[1:], Vn[1:]),
        target.advance(target_state, state.t, dt),
    )


# ---------------------------------------------------------------------------
# Impulses


def _gaps(X, V, offsets, ref: TargetState):
    """Position and velocity errors per agent (row 0 leader with zero offset)."""
    slots = np.vstack([np.zeros((1, 3)), offsets])
    return X - slots - ref.pos, V - ref.vel


def inside_q0(X, V, offsets, ref: TargetState, ue_ground, radius: float, mode: str) -> np.ndarray:
    """Boolean mask of agents that are already inside Q0."""
    ex, ev = _gaps(X, V, offsets, ref)
    px = np.linalg.norm(ex, axis=1) <= radius
    if mode == "slot_state":
        return px & (np.linalg.norm(ev, axis=1) <= radius)
    if mode == "slot_position":
        return px
    if mode == "ue_distance":
        return np.linalg.norm(X - ue_ground, axis=1) <= radius
    raise ConfigError(f"unknown q0 mode {mode!r}")


def control_strength(gap_x, gap_v, delta_x_max, delta_v_max, inside=None) -> float:
    """Common control strength ``ℓ`` for the agents outside Q0.

    ``gap_x``/``gap_v`` hold per-agent errors, shape (k, 3).  Per axis the
    admissible fraction is ``δ / |gap|``; a zero gap imposes no limit.  The
    result is the minimum over axes and over agents that are outside Q0,
    clamped to [0, 1].  If every agent is inside Q0 the result is 0.
    """
    gx = np.abs(np.atleast_2d(np.asarray(gap_x, dtype=float)))
    gv = np.abs(np.atleast_2d(np.asarray(gap_v, dtype=float)))
    if inside is None:
        inside = np.zeros(len(gx), dtype=bool)
    inside = np.asarray(inside, dtype=bool)
    if inside.all():
        return 0.0
    dx = np.asarray(delta_x_max, dtype=float)
    dv = np.asarray(delta_v_max, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rx = np.where(gx > 0, dx / gx, np.inf)
        rv = np.where(gv > 0, dv / gv, np.inf)
    ell = float(min(rx[~inside].min(), rv[~inside].min()))
    return min(max(ell, 0.0), 1.0)


def apply_impulse(X, V, offsets, ref: TargetState, ell, delta_x_max, delta_v_max):
    """Jump ``Δx = −ℓ (x − x* − x_g)``, ``Δv = −ℓ (v − v_g)`` per agent.

    ``ell`` is a per-agent vector (or scalar).  Returns new arrays and the
    jumps; a jump beyond the per-axis limits is an internal error.
    """
    ex, ev = _gaps(X, V, offsets, ref)
    ell = np.broadcast_to(np.asarray(ell, dtype=float), (len(X),))[:, None]
    dxj = -ell * ex
    dvj = -ell * ev
    tol = 1e-9
    if np.any(np.abs(dxj) > np.asarray(delta_x_max) * (1 + tol) + tol) or np.any(
        np.abs(dvj) > np.asarray(delta_v_max) * (1 + tol) + tol
    ):
        raise AssertionError("impulse exceeds the per-axis jump limits")
    return X + dxj, V + dvj, dxj, dvj


# ---------------------------------------------------------------------------
# Tracking gain condition


@dataclass(frozen=True)
class DynamicsBounds:
    """Sup-norm bounds of the follower drift, leader drift and target acceleration."""

    F_inf: float
    f0_inf: float
    g_inf: float


@dataclass(frozen=True)
class Theorem2Report:
    eta: float
    beta: tuple[float, ...]
    intervals: tuple[float, ...]
    rho: float
    condition_values: tuple[float, ...]
    satisfied: bool
    R_Q: float
    rho_sup: float
    lambda_term: float

    @property
    def rho_consistent(self) -> bool:
        """False when the supplied ρ cannot satisfy the inequality at these η, β."""
        return self.rho < self.rho_sup

    def summary(self) -> str:
        lines = [
            f"eta = {self.eta:.4f} (matrix term {self.lambda_term:.4f})",
            f"beta_k range = [{min(self.beta):.4f}, {max(self.beta):.4f}]",
            f"max condition value = {max(self.condition_values):.4f} -> satisfied = {self.satisfied}",
            f"largest admissible rho = {self.rho_sup:.4f}; supplied rho = {self.rho}",
            f"R_Q = {self.R_Q:.4f} m",
        ]
        if not self.rho_consistent:
            lines.append(
                f"INCONSISTENT: rho = {self.rho} violates eta*dt + ln(rho*beta) < 0; it would need rho < {self.rho_sup:.4f}"
            )
        return "\n".join(lines)


def tracking_lambda_term(adjacency, c: float) -> float:
    """``λ_max(Gᵀ + G)`` for ``G = [[0, I], [cL, cL]]`` (the Kronecker factor drops out)."""
    L = laplacian(adjacency)
    n = len(L)
    G = np.block([[np.zeros((n, n)), np.eye(n)], [c * L, c * L]])
    return float(jacobi_eigenvalues(G + G.T)[-1])


def theorem2_check(
    params: SwarmParams,
    imp: ImpulsiveParams,
    bounds: DynamicsBounds,
    ells: Sequence[float] | None = None,
    intervals: Sequence[float] | None = None,
    epsilon: float = 0.0,
) -> Theorem2Report:
    """Evaluate η, β_k, the per-interval condition and R_Q.

    ``ells`` holds the control strengths used at each impulse.  Without it the
    design value ``min(δ) / R_0`` is used, i.e. the strength applied to an
    agent sitting just outside Q0.  ``intervals`` defaults to τ for each k.
    """
    lam = tracking_lambda_term(params.adjacency, params.control_gain_schedule[0][1])
    eta = max(lam, 1.0) + 2 * max(bounds.F_inf, bounds.f0_inf) + 2 * bounds.g_inf
    if ells is None:
        dmin = min(min(imp.delta_x_max), min(imp.delta_v_max))
        ells = [min(dmin / imp.q0_radius, 1.0) if imp.q0_radius > 0 else 1.0]
    ells = np.clip(np.asarray(ells, dtype=float), 0.0, 1.0)
    # I + H with H = diag(-ℓ) has largest eigenvalue 1 - min ℓ; per impulse the
    # follower and leader blocks share the same ℓ.
    beta = 1.0 - ells
    if intervals is None:
        intervals = [imp.tau] * len(beta)
    dts = np.broadcast_to(np.asarray(intervals, dtype=float), beta.shape)
    with np.errstate(divide="ignore"):
        cond = eta * dts + np.log(imp.rho * beta)
        rho_sup = float(np.min(np.exp(-eta * dts) / beta))
    acc = bounds.f0_inf + bounds.g_inf
    tau = imp.tau
    R_Q = imp.q0_radius + max(acc * tau, imp.q0_radius * tau + 0.5 * acc * tau**2) + epsilon
    return Theorem2Report(
        eta=eta,
        beta=tuple(float(b) for b in beta),
        intervals=tuple(float(d) for d in dts),
        rho=imp.rho,
        condition_values=tuple(float(v) for v in cond),
        satisfied=bool(np.all(cond < 0)),
        R_Q=R_Q,
        rho_sup=rho_sup,
        lambda_term=lam,
    )


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class ImpulseRecord:
    t: float
    agent_id: int
    ell: float
    dx: np.ndarray
    dv: np.ndarray


@dataclass
class TrackingResult:
    times: np.ndarray
    positions: np.ndarray  # (T, n+1, 3), row 0 leader
    velocities: np.ndarray
    target_pos: np.ndarray  # reference x_g, (T, 3)
    target_vel: np.ndarray
    zeta_x: np.ndarray  # (T, n+1, 3) including the leader in row 0
    zeta_v: np.ndarray
    impulse_flags: np.ndarray
    impulses: list[ImpulseRecord]
    report: Theorem2Report | None
    completed: bool = True
    message: str = ""

    @property
    def err_pos_norm(self) -> np.ndarray:
        return np.linalg.norm(self.zeta_x.reshape(len(self.times), -1), axis=1)

    @property
    def err_vel_norm(self) -> np.ndarray:
        return np.linalg.norm(self.zeta_v.reshape(len(self.times), -1), axis=1)

    @property
    def max_agent_error(self) -> float:
        return float(np.max(np.linalg.norm(self.zeta_x, axis=2)))

    @property
    def within_RQ(self) -> bool | None:
        if self.report is None:
            return None
        return self.max_agent_error <= self.report.R_Q

    def write_csv(self, path) -> None:
        write_trajectory_csv(
            path, self.times, self.positions, self.velocities,
            self.zeta_x[:, 1:], self.zeta_v[:, 1:], self.impulse_flags,
        )

    def write_impulse_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t_k", "agent_id", "ell", "dx", "dy", "dz", "dvx", "dvy", "dvz"])
            for r in self.impulses:
                w.writerow([f"{r.t:.6f}", r.agent_id, f"{r.ell:.9g}"] + [f"{v + 0.0:.9g}" for v in (*r.dx, *r.dv)])


def _impulse_steps(imp: ImpulsiveParams, t0: float, dt: float, n_steps: int) -> set[int]:
    times = imp.impulse_times
    if times is None:
        per = imp.tau / dt
        k = int(round(per))
        if k < 1 or abs(per - k) > 1e-9 * per:
            raise ConfigError(f"dt = {dt} must divide tau = {imp.tau}")
        return set(range(k, n_steps + 1, k))
    steps = set()
    for t in times:
        s = (t - t0) / dt
        k = int(round(s))
        if abs(s - k) > 1e-9 * max(1.0, s):
            raise ConfigError(f"impulse time {t} is not on the dt grid")
        if 0 < k <= n_steps:
            steps.add(k)
    return steps


def simulate_tracking(
    params: SwarmParams,
    imp: ImpulsiveParams,
    target: TargetModel,
    init: SwarmState,
    t_end: float,
    dt: float = 0.01,
    *,
    bounds: DynamicsBounds | None = None,
    stride: int = 1,
    log_impulses: bool = True,
) -> TrackingResult:
    """Run the hybrid system and record tracking errors every ``stride`` steps."""
    if not dt > 0 or not t_end > init.t:
        raise ConfigError("need dt > 0 and t_end after the initial time")
    n_steps = int(round((t_end - init.t) / dt))
    kicks = _impulse_steps(imp, init.t, dt, n_steps)
    f = resolve_dynamics(params.dynamics)
    L = laplacian(params.adjacency)
    off = params.formation_offsets
    rhs = lambda t, x, v: _tracking_rhs(params, f, L, t, x, v)  # noqa: E731

    X, V = _stack(init)
    tg = target.initial()
    t = init.t
    rows_t, rows_x, rows_v, rows_gx, rows_gv, flags = [], [], [], [], [], []
    impulses: list[ImpulseRecord] = []
    ells: list[float] = []

    def record(kicked):
        ref = target.reference(tg)
        rows_t.append(t)
        rows_x.append(X.copy())
        rows_v.append(V.copy())
        rows_gx.append(ref.pos)
        rows_gv.append(ref.vel)
        flags.append(kicked)

    record(False)
    completed, message = True, ""
    for k in range(1, n_steps + 1):
        t_prev = t
        X, V = _rk4(rhs, t_prev, X, V, dt)
        tg = target.advance(tg, t_prev, dt)
        t = init.t + k * dt
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
            completed, message = False, f"state diverged at t={t:.4f}"
            break
        kicked = k in kicks
        if kicked:
            ref = target.reference(tg)
            ue = tg.pos
            inside = inside_q0(X, V, off, ref, ue, imp.q0_radius, imp.q0_mode)
            ex, ev = _gaps(X, V, off, ref)
            ell = control_strength(ex, ev, imp.delta_x_max, imp.delta_v_max, inside)
            per_agent = np.where(inside, 0.0, ell)
            X, V, dxj, dvj = apply_impulse(X, V, off, ref, per_agent, imp.delta_x_max, imp.delta_v_max)
            ells.append(ell)
            if log_impulses:
                for a in range(len(X)):
                    impulses.append(ImpulseRecord(t, a, float(per_agent[a]), dxj[a].copy(), dvj[a].copy()))
        if k % stride == 0:
            record(kicked)

    times = np.asarray(rows_t)
    P = np.asarray(rows_x)
    Vr = np.asarray(rows_v)
    gx = np.asarray(rows_gx)
    gv = np.asarray(rows_gv)
    slots = np.vstack([np.zeros((1, 3)), off])
    zx = P - slots[None] - gx[:, None, :]
    zv = Vr - gv[:, None, :]
    report = None
    if bounds is not None:
        report = theorem2_check(params, imp, bounds, ells if ells else None)
    return TrackingResult(times, P, Vr, gx, gv, zx, zv, np.asarray(flags, dtype=bool), impulses, report, completed, message)


# ---------------------------------------------------------------------------
# Case study


TRACKING_GAIN = 0.002
CASE_BOUNDS = DynamicsBounds(F_inf=1.0, f0_inf=1.0, g_inf=10.0)


@dataclass(frozen=True)
class TrackingScenario:
    """Four-UAV zigzag pursuit; the swarm tracks the UE lifted to the cruise altitude."""

    seed: int = 2024
    ue_speed: float = 10.0
    turn_times: tuple[float, ...] = (20.0, 25.0)
    headings_deg: tuple[float, ...] = (0.0, 90.0, 0.0)
    t_end: float = 30.0
    dt: float = 0.01
    tau: float = 0.02
    q0_radius: float = 10.0
    q0_mode: str = "ue_distance"
    delta_max: float = 5.0
    rho: float = 1.3
    gain: float = TRACKING_GAIN
    leader_spread: float = 10.0
    follower_spread: float = 20.0
    formation_offsets: np.ndarray | None = field(default=None)


def default_tracking_offsets() -> np.ndarray:
    """Triangle of slots 40 m around the leader, 10 m below it."""
    ang = np.radians([90.0, 210.0, 330.0])
    return np.column_stack([40 * np.cos(ang), 40 * np.sin(ang), np.full(3, -10.0)])


def tracking_case_study(sc: TrackingScenario | None = None):
    """Return (params, impulsive params, target, initial state) for the zigzag pursuit."""
    sc = sc or TrackingScenario()
    rng = as_generator(sc.seed)
    off = default_tracking_offsets() if sc.formation_offsets is None else np.asarray(sc.formation_offsets, float)
    params = SwarmParams(CASE_ADJACENCY, CASE_PINNING, ((0.0, sc.gain),), off, "case_study")
    d = (sc.delta_max,) * 3
    imp = ImpulsiveParams(sc.tau, d, d, sc.q0_radius, sc.rho, q0_mode=sc.q0_mode)
    target = TargetModel.zigzag(sc.ue_speed, sc.turn_times, sc.headings_deg, t_end=sc.t_end + 10, lift=CRUISE_ALTITUDE)
    x_g = target.reference(target.initial()).pos
    r = sc.leader_spread * math.sqrt(rng.random())
    phi = 2 * math.pi * rng.random()
    lead = x_g + np.array([r * math.cos(phi), r * math.sin(phi), 0.0])
    dirs = rng.normal(size=(3, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    fpos = x_g + off + dirs * sc.follower_spread * rng.random((3, 1)) ** (1 / 3)
    init = SwarmState(0.0, lead, np.zeros(3), fpos, np.zeros((3, 3)))
    return params, imp, target, init


def run_tracking_case(sc: TrackingScenario | None = None) -> TrackingResult:
    sc = sc or TrackingScenario()
    params, imp, target, init = tracking_case_study(sc)
    return simulate_tracking(params, imp, target, init, sc.t_end, sc.dt, bounds=CASE_BOUNDS)
