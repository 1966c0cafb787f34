"""Second-order leader-follower formation control with pinning.

Followers obey ``v̇_i = f_i − c [(L + B)(ξ_x + ξ_v)]_i`` where ``ξ_x`` and
``ξ_v`` stack the per-follower offsets from the leader (position minus the
formation slot, and velocity); that is the consensus coupling plus the
pinning feedback written in error coordinates.  The leader runs open loop on
``f`` alone.  Integration is fixed-step RK4.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AssumptionViolationError, ConfigError, GraphConfigurationError, NumericError
from .geometry import HeightLaw, deploy, delaunay, formation_target
from .rng import as_generator

CRUISE_ALTITUDE = 150.0
MAX_SPEED = 20.0

Dynamics = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Intrinsic dynamics


def case_study_dynamics(t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Per-agent drift ``1e-4 · [1, 1/(y²+1), z − 150]`` for positions of shape (k, 3)."""
    out = np.empty_like(x)
    out[:, 0] = 1e-4
    out[:, 1] = 1e-4 / (x[:, 1] ** 2 + 1.0)
    out[:, 2] = 1e-4 * (x[:, 2] - CRUISE_ALTITUDE)
    return out


def zero_dynamics(t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


DYNAMICS: dict[str, Dynamics] = {"case_study": case_study_dynamics, "zero": zero_dynamics}


def resolve_dynamics(d) -> Dynamics:
    if callable(d):
        return d
    try:
        return DYNAMICS[d]
    except KeyError:
        raise ConfigError(f"unknown dynamics {d!r}; expected one of {sorted(DYNAMICS)}") from None


# ---------------------------------------------------------------------------
# Parameters and state


@dataclass(frozen=True)
class SwarmParams:
    adjacency: np.ndarray
    pinning_gains: np.ndarray
    control_gain_schedule: tuple[tuple[float, float], ...]
    formation_offsets: np.ndarray
    dynamics: str | Dynamics = "case_study"
    speed_cap: float | None = None

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        b = np.asarray(self.pinning_gains, dtype=float).reshape(-1)
        n = len(b)
        if a.shape != (n, n):
            raise ConfigError(f"adjacency must be {n}x{n} to match {n} pinning gains, got {a.shape}")
        if np.any(np.diag(a) != 0) or np.any(a < 0):
            raise ConfigError("adjacency must have zero diagonal and non-negative entries")
        if np.any(b < 0) or not np.any(b > 0):
            raise ConfigError("pinning gains must be non-negative with at least one positive")
        sched = tuple((float(t), float(c)) for t, c in self.control_gain_schedule)
        if not sched:
            raise ConfigError("control_gain_schedule must not be empty")
        if any(c <= 0 for _, c in sched):
            raise ConfigError("control gains must be positive")
        if any(t1 >= t2 for (t1, _), (t2, _) in zip(sched, sched[1:])):
            raise ConfigError("control_gain_schedule times must be strictly increasing")
        off = np.asarray(self.formation_offsets, dtype=float).reshape(n, -1)
        resolve_dynamics(self.dynamics)
        if self.speed_cap is not None and not self.speed_cap > 0:
            raise ConfigError("speed_cap must be positive")
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "pinning_gains", b)
        object.__setattr__(self, "control_gain_schedule", sched)
        object.__setattr__(self, "formation_offsets", off)

    @property
    def n_followers(self) -> int:
        return len(self.pinning_gains)

    @property
    def coupling(self) -> np.ndarray:
        return laplacian(self.adjacency) + np.diag(self.pinning_gains)

    def gain_at(self, t: float) -> float:
        """Gain in force at time t; a switch time belongs to the earlier segment."""
        c = self.control_gain_schedule[0][1]
        for t0, ck in self.control_gain_schedule[1:]:
            if t > t0:
                c = ck
        return c


@dataclass(frozen=True)
class SwarmState:
    t: float
    leader_pos: np.ndarray
    leader_vel: np.ndarray
    follower_pos: np.ndarray
    follower_vel: np.ndarray

    def __post_init__(self):
        for name in ("leader_pos", "leader_vel", "follower_pos", "follower_vel"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite {name} at t={self.t}")
            object.__setattr__(self, name, arr)
        if self.t < 0:
            raise ValueError("time must be non-negative")

    def errors(self, offsets) -> tuple[np.ndarray, np.ndarray]:
        """Per-follower position error ``x_i − x_0 − x*_i`` and velocity error."""
        return (
            self.follower_pos - self.leader_pos - offsets,
            self.follower_vel - self.leader_vel,
        )


def laplacian(adjacency) -> np.ndarray:
    """``L = D − A`` with D the diagonal of row sums."""
    a = np.asarray(adjacency, dtype=float)
    return np.diag(a.sum(axis=1)) - a


# ---------------------------------------------------------------------------
# Sufficient gain condition


def jacobi_eigenvalues(sym, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=0, rtol=0):
        raise ValueError("jacobi_eigenvalues needs a square symmetric matrix")
    scale = max(float(np.max(np.abs(a))), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    else:
        raise NumericError("Jacobi eigenvalue iteration did not converge")
    return np.sort(np.diag(a))


@dataclass(frozen=True)
class Theorem1Report:
    q: np.ndarray
    P_diag: np.ndarray
    Q: np.ndarray
    lambda_max_P: float
    lambda_min_Q: float
    d: float
    rho1: float
    rho2: float
    c_min: float
    schedule: tuple[tuple[float, float], ...]
    satisfied_for: tuple[bool, ...]

    @property
    def satisfied(self) -> bool:
        return all(self.satisfied_for)


def theorem1_check(L, B, rho1: float, rho2: float, schedule: Sequence[tuple[float, float]]) -> Theorem1Report:
    """Evaluate the gain condition ``c > d λ_max(P) / λ_min(Q)`` per schedule segment."""
    M = np.asarray(L, dtype=float) + np.asarray(B, dtype=float)
    n = M.shape[0]
    if np.linalg.matrix_rank(M) < n:
        raise GraphConfigurationError("L + B is singular; some follower is unreachable from the leader")
    q = np.linalg.solve(M, np.ones(n))
    if np.any(q <= 0):
        raise AssumptionViolationError(f"q = (L+B)^-1 1 has non-positive entries {q}")
    p_diag = 1.0 / q
    P = np.diag(p_diag)
    Q = P @ M + M.T @ P
    Q = 0.5 * (Q + Q.T)  # exact symmetry; the two products can differ in the last ulp
    lam_min_q = float(jacobi_eigenvalues(Q)[0])
    if not lam_min_q > 0:
        raise AssumptionViolationError(f"Q is not positive definite (λ_min = {lam_min_q})")
    d = max(3 * rho1 + rho2, rho1 + 3 * rho2 + 2)
    lam_max_p = float(np.max(p_diag))
    c_min = d * lam_max_p / lam_min_q
    sched = tuple((float(t), float(c)) for t, c in schedule)
    return Theorem1Report(
        q, p_diag, Q, lam_max_p, lam_min_q, d, float(rho1), float(rho2), c_min, sched,
        tuple(c > c_min for _, c in sched),
    )


@dataclass(frozen=True)
class FlightEnvelope:
    xy_half_width: float = 2000.0
    z_range: tuple[float, float] = (0.0, 300.0)
    max_speed: float = MAX_SPEED


def estimate_lipschitz(
    dynamics: Dynamics,
    envelope: FlightEnvelope | None = None,
    n_samples: int = 20000,
    seed: int = 0,
    step: float = 1e-3,
) -> tuple[float, float]:
    """Sampled estimates of the Lipschitz constants (ρ1 in x, ρ2 in v).

    Central-difference Jacobians are taken at uniformly sampled envelope
    points and the largest spectral norms of ∂f/∂x and ∂f/∂v are returned.
    """
    env = envelope or FlightEnvelope()
    rng = as_generator(seed)
    x = np.column_stack([
        rng.uniform(-env.xy_half_width, env.xy_half_width, (n_samples, 2)),
        rng.uniform(*env.z_range, n_samples),
    ])
    dirs = rng.normal(size=(n_samples, 3))
    v = dirs / np.linalg.norm(dirs, axis=1, keepdims=True) * env.max_speed * rng.random((n_samples, 1)) ** (1 / 3)

    def jac(wrt):
        cols = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            if wrt == "x":
                hi, lo = dynamics(0.0, x + e, v), dynamics(0.0, x - e, v)
            else:
                hi, lo = dynamics(0.0, x, v + e), dynamics(0.0, x, v - e)
            cols.append((hi - lo) / (2 * step))
        return np.stack(cols, axis=2)  # (samples, out, in)

    rho1 = float(np.max(np.linalg.norm(jac("x"), ord=2, axis=(1, 2))))
    rho2 = float(np.max(np.linalg.norm(jac("v"), ord=2, axis=(1, 2))))
    return rho1, rho2


# ---------------------------------------------------------------------------
# Integration


def _rhs(params: SwarmParams, f: Dynamics, M: np.ndarray, t: float, X: np.ndarray, V: np.ndarray):
    # X, V: (n+1, 3), row 0 the leader
    acc = f(t, X, V)
    xi = X[1:] - X[0] - params.formation_offsets + V[1:] - V[0]
    acc = acc.copy()
    acc[1:] -= params.gain_at(t) * (M @ xi)
    return V, acc


def _rk4(rhs, t, X, V, dt):
    k1x, k1v = rhs(t, X, V)
    k2x, k2v = rhs(t + dt / 2, X + dt / 2 * k1x, V + dt / 2 * k1v)
    k3x, k3v = rhs(t + dt / 2, X + dt / 2 * k2x, V + dt / 2 * k2v)
    k4x, k4v = rhs(t + dt, X + dt * k3x, V + dt * k3v)
    Xn = X + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Vn = V + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return Xn, Vn


def _stack(state: SwarmState):
    X = np.vstack([state.leader_pos[None, :], state.follower_pos])
    V = np.vstack([state.leader_vel[None, :], state.follower_vel])
    return X, V


def _cap_speed(V, cap):
    if cap is None:
        return V
    speed = np.linalg.norm(V, axis=1, keepdims=True)
    return np.where(speed > cap, V * (cap / np.maximum(speed, 1e-300)), V)


def step_formation(state: SwarmState, params: SwarmParams, dt: float) -> SwarmState:
    """One RK4 step of leader plus followers."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = resolve_dynamics(params.dynamics)
    M = params.coupling
    X, V = _stack(state)
    Xn, Vn = _rk4(lambda t, x, v: _rhs(params, f, M, t, x, v), state.t, X, V, dt)
    Vn = _cap_speed(Vn, params.speed_cap)
    return SwarmState(state.t + dt, Xn[0], Vn[0], Xn[1:], Vn[1:])


@dataclass
class FormationResult:
    times: np.ndarray  # (T,)
    positions: np.ndarray  # (T, n+1, 3), row 0 leader
    velocities: np.ndarray
    xi_x: np.ndarray  # (T, n, 3)
    xi_v: np.ndarray
    completed: bool = True
    message: str = ""

    @property
    def err_pos_norm(self) -> np.ndarray:
        return np.linalg.norm(self.xi_x.reshape(len(self.times), -1), axis=1)

    @property
    def err_vel_norm(self) -> np.ndarray:
        return np.linalg.norm(self.xi_v.reshape(len(self.times), -1), axis=1)

    def write_csv(self, path) -> None:
        write_trajectory_csv(path, self.times, self.positions, self.velocities, self.xi_x, self.xi_v)


def write_trajectory_csv(path, times, positions, velocities, xi_x, xi_v, impulse_flags=None) -> None:
    """Trajectory rows ``t,agent_id,role,x,y,z,vx,vy,vz,err_pos,err_vel`` (plus ``impulse``)."""
    header = ["t", "agent_id", "role", "x", "y", "z", "vx", "vy", "vz", "err_pos", "err_vel"]
    if impulse_flags is not None:
        header.append("impulse")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(times):
            for a in range(positions.shape[1]):
                if a == 0:
                    ep = ev = 0.0
                else:
                    ep = float(np.linalg.norm(xi_x[k, a - 1]))
                    ev = float(np.linalg.norm(xi_v[k, a - 1]))
                row = [f"{t:.6f}", a, "leader" if a == 0 else "follower"]
                row += [f"{v + 0.0:.9g}" for v in positions[k, a]] + [f"{v + 0.0:.9g}" for v in velocities[k, a]]
                row += [f"{ep:.9g}", f"{ev:.9g}"]
                if impulse_flags is not None:
                    row.append(int(bool(impulse_flags[k])))
                w.writerow(row)


def simulate_formation(
    params: SwarmParams,
    init: SwarmState,
    t_end: float,
    dt: float = 0.01,
    *,
    noise: float = 0.0,
    seed: int | None = None,
    stride: int = 100,
    rho: tuple[float, float] | None = None,
) -> FormationResult:
    """Integrate to ``t_end`` and record every ``stride``-th step.

    With ``noise > 0`` the coupling matrix is perturbed by white noise: after
    each deterministic RK4 step, follower velocities receive the
    Euler-Maruyama increment ``σ Σ_j (ξ_x,j + ξ_v,j) ΔW_ij``.  When ``rho``
    is given the sufficient gain condition is checked first and a warning is
    issued (not an error) if some schedule entry falls short.
    """
    if not dt > 0 or not t_end > init.t:
        raise ConfigError("need dt > 0 and t_end after the initial time")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if rho is not None:
        rep = theorem1_check(laplacian(params.adjacency), np.diag(params.pinning_gains), *rho, params.control_gain_schedule)
        if not rep.satisfied:
            warnings.warn(
                f"gain schedule violates the sufficient gain bound c > {rep.c_min:.4g} for some segments",
                RuntimeWarning,
                stacklevel=2,
            )
    f = resolve_dynamics(params.dynamics)
    M = params.coupling
    n = params.n_followers
    rng = as_generator(seed) if noise > 0 else None
    off = params.formation_offsets
    rhs = lambda t, x, v: _rhs(params, f, M, t, x, v)  # noqa: E731

    n_steps = int(round((t_end - init.t) / dt))
    n_rec = n_steps // stride + 1
    times = np.empty(n_rec)
    P = np.empty((n_rec, n + 1, 3))
    Vr = np.empty((n_rec, n + 1, 3))
    X, V = _stack(init)
    t = init.t
    rec = 0
    times[0], P[0], Vr[0] = t, X, V
    rec = 1
    completed, message = True, ""
    sqdt = math.sqrt(dt)
    for k in range(1, n_steps + 1):
        X, V = _rk4(rhs, t, X, V, dt)
        if rng is not None:
            xi = X[1:] - X[0] - off + V[1:] - V[0]
            dW = rng.normal(0.0, sqdt, size=(n, n))
            V[1:] += noise * (dW @ xi)
        V = _cap_speed(V, params.speed_cap)
        t = init.t + k * dt
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
            completed, message = False, f"state diverged at t={t:.3f}"
            break
        if k % stride == 0:
            times[rec], P[rec], Vr[rec] = t, X, V
            rec += 1
    times, P, Vr = times[:rec], P[:rec], Vr[:rec]
    xi_x = P[:, 1:] - P[:, :1] - off
    xi_v = Vr[:, 1:] - Vr[:, :1]
    return FormationResult(times, P, Vr, xi_x, xi_v, completed, message)


# ---------------------------------------------------------------------------
# Case study


CASE_ADJACENCY = np.array([[0.0, 0.5, 1.0], [0.5, 0.0, 0.0], [1.0, 0.0, 0.0]])
CASE_PINNING = np.array([1.0, 0.0, 1.0])
CASE_SCHEDULE = ((0.0, 0.002), (100.0, 0.02), (200.0, 0.1))


@dataclass(frozen=True)
class FormationScenario:
    """Settings for the three-follower case study; see ``case_study``."""

    seed: int = 2024
    density: float = 16e-6
    region_radius: float = 3000.0
    takeoff_radius: float = 200.0
    takeoff_speed: float = 5.0
    t_end: float = 500.0
    dt: float = 0.01
    noise: float = 0.0
    speed_cap: float | None = MAX_SPEED
    schedule: tuple[tuple[float, float], ...] = field(default=CASE_SCHEDULE)


def case_study(sc: FormationScenario | None = None) -> tuple[SwarmParams, SwarmState, np.ndarray]:
    """Case-study swarm: chain graph, pinning on followers 1 and 3, weak intrinsic drift.

    Formation slots come from a random Delaunay cell of a sampled deployment:
    the cell's centroid at the cruise altitude is the leader's slot and the
    three vertices (with their own heights) are the followers' slots.
    Followers start on the ground within ``takeoff_radius`` of the origin,
    climbing at ``takeoff_speed``; the leader starts hovering at (0, 0, 150).
    Returns the parameters, the initial state and the absolute target cell.
    """
    sc = sc or FormationScenario()
    rng = as_generator(sc.seed)
    dep = deploy(sc.density, sc.region_radius, HeightLaw(), rng)
    tri = delaunay(dep.planar_points)
    cell = formation_target(dep, tri, rng, apex_law=HeightLaw.fixed(CRUISE_ALTITUDE))
    apex = cell[3]
    offsets = cell[:3] - apex
    r = sc.takeoff_radius * np.sqrt(rng.random(3))
    phi = 2 * math.pi * rng.random(3)
    fpos = np.column_stack([r * np.cos(phi), r * np.sin(phi), np.zeros(3)])
    fvel = np.tile([0.0, 0.0, sc.takeoff_speed], (3, 1))
    params = SwarmParams(CASE_ADJACENCY, CASE_PINNING, sc.schedule, offsets, "case_study", sc.speed_cap)
    init = SwarmState(0.0, np.array([0.0, 0.0, CRUISE_ALTITUDE]), np.zeros(3), fpos, fvel)
    return params, init, cell
