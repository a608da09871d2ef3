"""Closed-loop integration and trajectory-level guarantee checks.

The integrator is classical fixed-step RK4 with the projection controller
evaluated at every stage point, so the recorded solution tracks the
continuous-time model rather than a zero-order-hold approximation.  Leaving
the strict-feasibility region or blowing up numerically are first-class
termination reasons, not errors: the theory only promises anything while
the state stays where the feasible set has an interior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .families import (
    ProjectionController,
    eval_controller,
    make_controller_evaluator,
    project_feasible,
    strictly_feasible,
)
from .linalg import cholesky
from .lure import LtiPlant


class Termination(enum.Enum):
    COMPLETED = "completed"
    LEFT_FEASIBLE_REGION = "left_feasible_region"
    NUMERICAL_BLOWUP = "numerical_blowup"


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Plant dx/dt = A x + B u*(x) closed through a projection controller."""

    plant: LtiPlant
    controller: ProjectionController

    def __post_init__(self):
        gain = np.asarray(self.controller.gain)
        if gain.shape != (self.plant.input_dim, self.plant.state_dim):
            raise ValueError(
                f"controller gain shape {gain.shape} does not match plant "
                f"({self.plant.input_dim},{self.plant.state_dim})"
            )


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 15.0
    blowup_norm: float = 1e8

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    termination: Termination

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.inputs)):
            raise ValueError("times, states, inputs must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class EnvelopeReport:
    eta: float
    max_violation: float
    first_violation_time: float | None
    passed: bool


@dataclass(frozen=True)
class LyapunovReport:
    passed: bool
    worst_slack: float


@dataclass(frozen=True)
class EquilibriumReport:
    point: np.ndarray
    is_origin: bool
    controller_norm: float


@dataclass(frozen=True)
class RateFit:
    eta_assumed: float
    m_fit: float


@dataclass(frozen=True)
class SafetyReport:
    passed: bool
    min_h: float


def closed_loop_field(sys: ClosedLoopSystem) -> Callable[[np.ndarray], np.ndarray]:
    """The vector field x -> A x + B u*(x)."""
    a, b = sys.plant.a, sys.plant.b

    def field(x):
        return a @ x + b @ eval_controller(sys.controller, x).u

    return field


def frozen_constraint_field(sys: ClosedLoopSystem, z) -> Callable[[np.ndarray], np.ndarray]:
    """Time-frozen virtual field y -> A y + B proj onto Gamma(z) of K y.

    Freezing the constraint state turns the loop into a standard Lur'e
    system whose nonlinearity is a fixed projection; certified (P, eta)
    must make this field contract for every choice of z in the region.
    """
    a, b = sys.plant.a, sys.plant.b
    gain = sys.controller.gain
    family = sys.controller.family
    z = np.asarray(z, dtype=float)

    def field(y):
        u = project_feasible(family, z, gain @ y).u
        return a @ y + b @ u

    return field


def integrate(sys: ClosedLoopSystem, x0, cfg: SimConfig) -> Trajectory:
    """Fixed-step RK4 rollout of the closed loop from x0.

    The controller is evaluated at all four stage points.  Records one
    sample per step; terminates early when a stage state leaves the
    strict-feasibility region or the state norm passes cfg.blowup_norm.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = sys.plant.state_dim
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 has non-finite entries")
    if not strictly_feasible(sys.controller.family, x):
        raise ValueError("x0 is outside the strict-feasibility region")

    a, b = sys.plant.a, sys.plant.b
    evaluate = make_controller_evaluator(sys.controller)
    dt = cfg.dt
    n_steps = int(round(cfg.horizon / dt))

    times: list[float] = []
    states: list[np.ndarray] = []
    inputs: list[np.ndarray] = []
    termination = Termination.COMPLETED

    for step in range(n_steps + 1):
        u = evaluate(x)
        if u is None:
            termination = Termination.LEFT_FEASIBLE_REGION
            break
        times.append(step * dt)
        states.append(x.copy())
        inputs.append(np.asarray(u, dtype=float).copy())
        if step == n_steps:
            break

        k1 = a @ x + b @ u
        stage_slopes = [k1]
        left_region = False
        for coeff in (0.5, 0.5, 1.0):
            probe = x + coeff * dt * stage_slopes[-1]
            stage_u = evaluate(probe)
            if stage_u is None:
                left_region = True
                break
            stage_slopes.append(a @ probe + b @ stage_u)
        if left_region:
            termination = Termination.LEFT_FEASIBLE_REGION
            break
        k1, k2, k3, k4 = stage_slopes
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > cfg.blowup_norm:
            termination = Termination.NUMERICAL_BLOWUP
            break
        x = x_new

    return Trajectory(
        times=np.array(times),
        states=np.array(states).reshape(len(times), n),
        inputs=np.array(inputs).reshape(len(times), -1),
        termination=termination,
    )


def batch_simulate(sys: ClosedLoopSystem, x0_list, cfg: SimConfig) -> list:
    """Sequential integrate over initial conditions; per-entry failures are
    collected in place of the trajectory instead of aborting the batch."""
    results = []
    for x0 in x0_list:
        try:
            results.append(integrate(sys, x0, cfg))
        except Exception as exc:  # noqa: BLE001 - failures are data here
            results.append(exc)
    return results


def weighted_norms(states: np.ndarray, p) -> np.ndarray:
    """Row-wise P-weighted norms of a stack of states."""
    factor = cholesky(p)
    if factor is None:
        raise ValueError("P must be positive definite")
    return np.sqrt(np.maximum(((states @ factor) ** 2).sum(axis=1), 0.0))


def check_decay_envelope(traj: Trajectory, p, eta: float,
                         slack: float = 1e-6) -> EnvelopeReport:
    """Check |x(t)|_P <= exp(-eta t) |x0|_P up to slack * |x0|_P."""
    norms = weighted_norms(traj.states, p)
    bound = np.exp(-eta * traj.times) * norms[0]
    violations = norms - bound
    max_violation = float(violations.max())
    threshold = slack * norms[0]
    over = np.nonzero(violations > threshold)[0]
    first = float(traj.times[over[0]]) if over.size else None
    return EnvelopeReport(
        eta=eta,
        max_violation=max_violation,
        first_violation_time=first,
        passed=max_violation <= threshold,
    )


def check_lyapunov_decrease(traj: Trajectory, p, eta: float,
                            fd_tol: float) -> LyapunovReport:
    """Central-difference check of dV/dt <= -2 eta V + fd_tol (1 + V), V = x^T P x."""
    if len(traj.times) < 3:
        raise ValueError("need at least 3 samples for central differences")
    v = weighted_norms(traj.states, p) ** 2
    t = traj.times
    dv = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
    residual = dv + 2.0 * eta * v[1:-1] - fd_tol * (1.0 + v[1:-1])
    worst = float(residual.max())
    return LyapunovReport(passed=worst <= 0.0, worst_slack=worst)


def detect_equilibrium(traj: Trajectory, ctrl: ProjectionController,
                       tol: float = 1e-6) -> EquilibriumReport | None:
    """Detect settling onto the equilibrium set (controller output vanishes).

    Returns the final state when u*(x_final) is tol-small and the last 10%
    of samples moved by at most 10 tol; None while still transient.
    """
    if traj.termination is not Termination.COMPLETED:
        raise ValueError("equilibrium detection needs a completed trajectory")
    x_final = traj.states[-1]
    window = max(1, len(traj.times) // 10)
    drift = np.linalg.norm(traj.states[-window:] - x_final, axis=1).max()
    if drift > 10.0 * tol:
        return None
    u_norm = float(np.linalg.norm(eval_controller(ctrl, x_final).u))
    if u_norm > tol:
        return None
    return EquilibriumReport(
        point=x_final.copy(),
        is_origin=bool(np.linalg.norm(x_final) <= tol),
        controller_norm=u_norm,
    )


def fit_semiglobal_rate(traj: Trajectory, eta: float,
                        origin_tol: float = 1e-3) -> RateFit:
    """Minimal M with |x(t)| <= M exp(-eta t) |x0| over the recorded samples.

    Only meaningful for trajectories that converged to the origin; the fit
    refuses runs whose final state is not origin_tol-small relative to x0.
    """
    norms = np.linalg.norm(traj.states, axis=1)
    x0_norm = norms[0]
    if x0_norm == 0.0:
        raise ValueError("x0 is the origin; nothing to fit")
    if norms[-1] > origin_tol * max(1.0, x0_norm):
        raise ValueError(
            f"trajectory did not converge to the origin (final norm {norms[-1]:.3e})"
        )
    m_fit = float((norms * np.exp(eta * traj.times)).max() / x0_norm)
    return RateFit(eta_assumed=eta, m_fit=m_fit)


def check_safety(traj: Trajectory, h, tol: float = 0.0) -> SafetyReport:
    """min_t h(x(t)) >= -tol along the recorded samples."""
    values = np.array([float(h(x)) for x in traj.states])
    min_h = float(values.min())
    return SafetyReport(passed=min_h >= -tol, min_h=min_h)


def trajectory_csv_lines(traj: Trajectory, p=None, h=None) -> list[str]:
    """CSV serialization: t,x1..xn,u1..um[,norm_P][,h], 17 significant digits."""
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
    norms = None
    if p is not None:
        norms = weighted_norms(traj.states, p)
        header.append("norm_P")
    h_vals = None
    if h is not None:
        h_vals = [float(h(x)) for x in traj.states]
        header.append("h")
    lines = [",".join(header)]
    for i in range(len(traj.times)):
        row = [traj.times[i], *traj.states[i], *traj.inputs[i]]
        if norms is not None:
            row.append(norms[i])
        if h_vals is not None:
            row.append(h_vals[i])
        lines.append(",".join(f"{v:.17g}" for v in row))
    return lines


def write_trajectory_csv(traj: Trajectory, path, p=None, h=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(trajectory_csv_lines(traj, p=p, h=h)) + "\n")
