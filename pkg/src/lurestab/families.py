"""Parametric projection controllers u*(x) = proj onto the feasible set of Kx.

Three concrete constraint families are supported, each describing a
state-dependent feasible control set as affine inequality rows in u:

  * StateBox           -v(x) <= u <= v(x), with v(x) > 0 entrywise
  * HalfspacePlusBox   a(x)^T u <= b(x) together with -u_bar <= u <= u_bar
  * AffineInequalities A(x) u <= b(x) with arbitrary rows

Projections onto boxes are exact clamps; polyhedral projections run
Hildreth's coordinatewise dual ascent with KKT-based stopping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

PROJ_TOL = 1e-12
PROJ_MAX_ITER = 10_000
ACTIVE_MULTIPLIER_TOL = 1e-8
STRICT_MARGIN = 1e-12


class InfeasibleSetError(ValueError):
    """The requested feasible set is empty or degenerate."""


class InfeasibleStateError(ValueError):
    """The state left the region where the feasible set has an interior."""


class ProjectionConvergenceError(RuntimeError):
    """Dual ascent hit the iteration cap; carries the residuals reached."""

    def __init__(self, primal_violation: float, comp_slack: float, iterations: int):
        self.primal_violation = primal_violation
        self.comp_slack = comp_slack
        self.iterations = iterations
        super().__init__(
            f"projection did not converge in {iterations} sweeps "
            f"(primal violation {primal_violation:.3e}, "
            f"complementarity slack {comp_slack:.3e})"
        )


@dataclass(frozen=True)
class StateBox:
    """Actuation bounds -v(x) <= u <= v(x); bound(x) must be positive entrywise."""

    bound: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HalfspacePlusBox:
    """One state-dependent halfspace a(x)^T u <= b(x) plus the fixed box |u| <= box_bound."""

    normal: Callable[[np.ndarray], np.ndarray]
    offset: Callable[[np.ndarray], float]
    box_bound: float


@dataclass(frozen=True)
class AffineInequalities:
    """General affine rows matrix(x) @ u <= bound(x)."""

    matrix: Callable[[np.ndarray], np.ndarray]
    bound: Callable[[np.ndarray], np.ndarray]


ConstraintFamily = Union[StateBox, HalfspacePlusBox, AffineInequalities]


@dataclass(frozen=True)
class ProjectionController:
    """Nominal linear gain composed with projection onto the family's feasible set."""

    gain: np.ndarray
    family: ConstraintFamily

    @property
    def input_dim(self) -> int:
        return self.gain.shape[0]


@dataclass(frozen=True)
class ProjResult:
    u: np.ndarray
    kkt_residual: float
    active_constraints: tuple[int, ...]
    iterations: int


def proj_box(z, lo, hi) -> np.ndarray:
    """Entrywise clamp of z to [lo, hi]; unique Euclidean projection onto the box."""
    z = np.asarray(z, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box is empty: lo > hi in some entry")
    return np.minimum(np.maximum(z, lo), hi)


def proj_halfspace(z, a, b: float) -> np.ndarray:
    """Euclidean projection of z onto {u : a^T u <= b}."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    norm2 = float(a @ a)
    if norm2 == 0.0:
        if b < 0:
            raise InfeasibleSetError("zero normal with negative offset")
        return z.copy()
    excess = float(a @ z) - b
    if excess <= 0.0:
        return z.copy()
    return z - (excess / norm2) * a


def _hildreth(z, rows, bounds, norms2, tol, max_iter, mu0=None):
    """Pure-python Hildreth sweeps; returns (u, mu, primal_viol, slack, sweeps)."""
    m = len(z)
    p = len(rows)
    u = list(z)
    mu = list(mu0) if mu0 is not None else [0.0] * p
    if mu0 is not None:
        # stationarity u = z - A^T mu must hold for the warm start too
        for i in range(p):
            mi = mu[i]
            if mi:
                row = rows[i]
                for j in range(m):
                    u[j] -= mi * row[j]
    primal_viol = comp_slack = np.inf
    for sweep in range(1, max_iter + 1):
        for i in range(p):
            row = rows[i]
            s = 0.0
            for j in range(m):
                s += row[j] * u[j]
            new_mu = mu[i] + (s - bounds[i]) / norms2[i]
            if new_mu < 0.0:
                new_mu = 0.0
            delta = new_mu - mu[i]
            if delta:
                mu[i] = new_mu
                for j in range(m):
                    u[j] -= delta * row[j]
        primal_viol = 0.0
        comp_slack = 0.0
        for i in range(p):
            row = rows[i]
            s = 0.0
            for j in range(m):
                s += row[j] * u[j]
            r = s - bounds[i]
            if r > primal_viol:
                primal_viol = r
            slack = mu[i] * r
            if slack < 0.0:
                slack = -slack
            if slack > comp_slack:
                comp_slack = slack
        if primal_viol <= tol and comp_slack <= tol:
            return u, mu, primal_viol, comp_slack, sweep
    return u, mu, primal_viol, comp_slack, max_iter


def proj_polyhedron(z, a_ineq, b_ineq, tol: float = PROJ_TOL,
                    max_iter: int = PROJ_MAX_ITER, mu0=None) -> ProjResult:
    """Euclidean projection of z onto {u : A u <= b} by Hildreth dual ascent.

    Zero rows with nonnegative bound are dropped; a zero row with negative
    bound certifies emptiness.  Exhausting max_iter raises
    ProjectionConvergenceError unless the dual has blown up, which is
    reported as infeasibility instead.
    """
    z = np.asarray(z, dtype=float)
    a = np.atleast_2d(np.asarray(a_ineq, dtype=float))
    b = np.atleast_1d(np.asarray(b_ineq, dtype=float))
    if a.shape[0] != b.shape[0] or a.shape[1] != z.shape[0]:
        raise ValueError(
            f"inconsistent shapes: A {a.shape}, b {b.shape}, z {z.shape}"
        )
    norms2 = (a * a).sum(axis=1)
    keep = []
    for i in range(a.shape[0]):
        if norms2[i] == 0.0:
            if b[i] < 0.0:
                raise InfeasibleSetError(f"row {i} is zero with negative bound {b[i]}")
            continue
        keep.append(i)
    if not keep:
        return ProjResult(u=z.copy(), kkt_residual=0.0, active_constraints=(), iterations=0)

    rows = [tuple(a[i]) for i in keep]
    bounds = [float(b[i]) for i in keep]
    kept_norms2 = [float(norms2[i]) for i in keep]
    mu_start = None if mu0 is None else [float(mu0[i]) for i in keep]
    u, mu, primal_viol, comp_slack, sweeps = _hildreth(
        [float(v) for v in z], rows, bounds, kept_norms2, tol, max_iter, mu_start
    )
    if primal_viol > tol or comp_slack > tol:
        scale = 1.0 + float(np.linalg.norm(z))
        if max(mu) > 1e10 * scale:
            raise InfeasibleSetError(
                f"dual variables diverged (|mu| up to {max(mu):.3e}); feasible set looks empty"
            )
        raise ProjectionConvergenceError(primal_viol, comp_slack, sweeps)
    active = tuple(keep[i] for i in range(len(keep)) if mu[i] > ACTIVE_MULTIPLIER_TOL)
    return ProjResult(
        u=np.array(u),
        kkt_residual=max(primal_viol, comp_slack, 0.0),
        active_constraints=active,
        iterations=sweeps,
    )


def _proj_halfspace_box(z_list, a_list, b0: float, u_bar: float):
    """Exact projection onto {a^T u <= b0} intersect [-u_bar, u_bar]^m.

    The KKT system reduces to u = clip(z - theta a) with a single scalar
    multiplier theta >= 0; g(theta) = a^T clip(z - theta a) is piecewise
    linear and nonincreasing, so the crossing g(theta) = b0 is found by a
    breakpoint scan.  Requires strict feasibility (-u_bar |a|_1 < b0) and
    a != 0; returns (u, theta, segments_scanned).
    """
    m = len(z_list)

    def clipped(theta):
        u = []
        for j in range(m):
            c = z_list[j] - theta * a_list[j]
            if c > u_bar:
                c = u_bar
            elif c < -u_bar:
                c = -u_bar
            u.append(c)
        return u

    def g(theta):
        s = 0.0
        u = clipped(theta)
        for j in range(m):
            s += a_list[j] * u[j]
        return s, u

    g0, u0 = g(0.0)
    if g0 <= b0:
        return u0, 0.0, 0

    # positive thetas where a component enters or leaves its bound
    breaks = sorted(
        t
        for j in range(m)
        if a_list[j] != 0.0
        for t in ((z_list[j] - u_bar) / a_list[j], (z_list[j] + u_bar) / a_list[j])
        if t > 0.0
    )
    lo_t, lo_g = 0.0, g0
    scanned = 0
    for t in breaks:
        scanned += 1
        gt, _ = g(t)
        if gt <= b0:
            slope = (gt - lo_g) / (t - lo_t) if t > lo_t else 0.0
            theta = lo_t if slope == 0.0 else lo_t + (b0 - lo_g) / slope
            return clipped(theta), theta, scanned
        lo_t, lo_g = t, gt
    # past the last breakpoint every component is saturated and
    # g == -u_bar |a|_1 < b0 under strict feasibility, so this is unreachable
    raise InfeasibleSetError("halfspace misses the box")


def constraint_rows(family: ConstraintFamily, x) -> tuple[np.ndarray, np.ndarray]:
    """Affine rows (A, b) with Gamma(x) = {u : A u <= b}, in documented row order."""
    x = np.asarray(x, dtype=float)
    if isinstance(family, StateBox):
        v = np.asarray(family.bound(x), dtype=float)
        m = v.shape[0]
        eye = np.eye(m)
        return np.vstack([eye, -eye]), np.concatenate([v, v])
    if isinstance(family, HalfspacePlusBox):
        a = np.asarray(family.normal(x), dtype=float)
        m = a.shape[0]
        eye = np.eye(m)
        rows = np.vstack([a.reshape(1, m), eye, -eye])
        bounds = np.concatenate(
            [[float(family.offset(x))], np.full(2 * m, family.box_bound)]
        )
        return rows, bounds
    if isinstance(family, AffineInequalities):
        return (
            np.atleast_2d(np.asarray(family.matrix(x), dtype=float)),
            np.atleast_1d(np.asarray(family.bound(x), dtype=float)),
        )
    raise TypeError(f"unknown constraint family {type(family).__name__}")


def strictly_feasible(family: ConstraintFamily, x) -> bool:
    """Does Gamma(x) have nonempty interior (x inside the strict-feasibility region)?"""
    x = np.asarray(x, dtype=float)
    if isinstance(family, StateBox):
        return bool(np.all(np.asarray(family.bound(x), dtype=float) > 0.0))
    if isinstance(family, HalfspacePlusBox):
        if family.box_bound <= 0.0:
            return False
        a = np.asarray(family.normal(x), dtype=float)
        # infimum of a^T u over the open box is attained toward -u_bar * sign(a)
        lowest = -family.box_bound * float(np.abs(a).sum())
        return lowest < float(family.offset(x)) - STRICT_MARGIN
    if isinstance(family, AffineInequalities):
        a, b = constraint_rows(family, x)
        return _max_margin(a, b) > STRICT_MARGIN
    raise TypeError(f"unknown constraint family {type(family).__name__}")


def _max_margin(a, b, prox_steps: int = 32) -> float:
    """Approximate sup {s : A u + s 1 <= b} by proximal ascent on s.

    Each step projects the previous point pushed along +s onto the augmented
    polyhedron, which is the proximal-point iteration for the margin LP.
    """
    p, m = a.shape
    aug = np.hstack([a, np.ones((p, 1))])
    step = 1.0 + float(np.abs(b).max()) if b.size else 1.0
    point = np.zeros(m + 1)
    margin = -np.inf
    for _ in range(prox_steps):
        target = point.copy()
        target[-1] += step
        try:
            res = proj_polyhedron(target, aug, b, tol=1e-10)
        except ProjectionConvergenceError:
            break
        point = res.u
        if abs(point[-1] - margin) <= 1e-12:
            margin = point[-1]
            break
        margin = point[-1]
    return float(margin)


def zero_feasible(family: ConstraintFamily, x) -> bool:
    """Is u = 0 a feasible control at x (Gamma(x) contains the origin)?"""
    x = np.asarray(x, dtype=float)
    if isinstance(family, StateBox):
        return bool(np.all(np.asarray(family.bound(x), dtype=float) >= 0.0))
    if isinstance(family, HalfspacePlusBox):
        return float(family.offset(x)) >= 0.0 and family.box_bound >= 0.0
    if isinstance(family, AffineInequalities):
        return bool(np.all(np.asarray(family.bound(x), dtype=float) >= 0.0))
    raise TypeError(f"unknown constraint family {type(family).__name__}")


def project_feasible(family: ConstraintFamily, x, z, tol: float = PROJ_TOL,
                     max_iter: int = PROJ_MAX_ITER, mu0=None) -> ProjResult:
    """Project z onto Gamma(x) for the given family.

    Boxes clamp exactly; the halfspace-plus-box family has an exact scalar
    KKT solve (Hildreth zigzags when the halfspace runs nearly parallel to
    a box face, as happens along obstacle boundaries); general affine rows
    go through proj_polyhedron.
    """
    z = np.asarray(z, dtype=float)
    if isinstance(family, StateBox):
        v = np.asarray(family.bound(x), dtype=float)
        u = proj_box(z, -v, v)
        m = v.shape[0]
        active = tuple(int(i) for i in np.nonzero(z > v)[0])
        active += tuple(int(i) + m for i in np.nonzero(z < -v)[0])
        return ProjResult(u=u, kkt_residual=0.0, active_constraints=active, iterations=1)
    if isinstance(family, HalfspacePlusBox):
        a = np.asarray(family.normal(x), dtype=float)
        b0 = float(family.offset(x))
        u_bar = float(family.box_bound)
        m = z.shape[0]
        if float(a @ a) == 0.0:
            if b0 < 0.0:
                raise InfeasibleSetError("zero normal with negative offset")
            u = proj_box(z, -np.full(m, u_bar), np.full(m, u_bar))
            theta = 0.0
            scanned = 0
        else:
            if -u_bar * float(np.abs(a).sum()) >= b0:
                raise InfeasibleSetError("halfspace misses the box")
            u_list, theta, scanned = _proj_halfspace_box(
                [float(c) for c in z], [float(c) for c in a], b0, u_bar
            )
            u = np.array(u_list)
        active = [0] if theta > ACTIVE_MULTIPLIER_TOL else []
        active += [1 + int(i) for i in np.nonzero(u >= u_bar)[0]]
        active += [1 + m + int(i) for i in np.nonzero(u <= -u_bar)[0]]
        residual = max(0.0, float(a @ u) - b0) if theta == 0.0 else abs(float(a @ u) - b0)
        return ProjResult(u=u, kkt_residual=residual,
                          active_constraints=tuple(active), iterations=scanned)
    rows, bounds = constraint_rows(family, x)
    return proj_polyhedron(z, rows, bounds, tol=tol, max_iter=max_iter, mu0=mu0)


def eval_controller(ctrl: ProjectionController, x, tol: float = PROJ_TOL,
                    max_iter: int = PROJ_MAX_ITER, mu0=None) -> ProjResult:
    """Evaluate u*(x): project the nominal command through the feasible set.

    Refuses states outside the strict-feasibility region, where the
    controller may fail to be continuous.
    """
    x = np.asarray(x, dtype=float)
    if not strictly_feasible(ctrl.family, x):
        raise InfeasibleStateError(
            "state is outside the strict-feasibility region"
        )
    return project_feasible(ctrl.family, x, ctrl.gain @ x, tol=tol,
                            max_iter=max_iter, mu0=mu0)


def make_controller_evaluator(ctrl: ProjectionController, tol: float = PROJ_TOL,
                              max_iter: int = PROJ_MAX_ITER):
    """Low-overhead closure evaluating u*(x) for tight integration loops.

    Returns evaluate(x) -> u, or None when x has left the
    strict-feasibility region.  Semantics match eval_controller; only the
    bookkeeping is leaner.
    """
    gain = np.asarray(ctrl.gain, dtype=float)
    family = ctrl.family

    if isinstance(family, StateBox):
        bound = family.bound

        def evaluate_box(x):
            v = np.asarray(bound(x), dtype=float)
            if not np.all(v > 0.0):
                return None
            return np.clip(gain @ x, -v, v)

        return evaluate_box

    if isinstance(family, HalfspacePlusBox):
        normal, offset = family.normal, family.offset
        u_bar = float(family.box_bound)
        m = gain.shape[0]

        def evaluate_halfspace_box(x):
            if u_bar <= 0.0:
                return None
            a = np.asarray(normal(x), dtype=float)
            b0 = float(offset(x))
            a_list = [float(c) for c in a]
            norm2 = 0.0
            abs_sum = 0.0
            for c in a_list:
                norm2 += c * c
                abs_sum += c if c >= 0.0 else -c
            if -u_bar * abs_sum >= b0 - STRICT_MARGIN:
                return None
            z = gain @ x
            if norm2 == 0.0:
                # halfspace vacuous (b0 >= 0 here); clamp to the box
                return np.clip(z, -u_bar, u_bar)
            z_list = [float(c) for c in z]
            inside = True
            dot = 0.0
            for j in range(m):
                zj = z_list[j]
                if zj > u_bar or zj < -u_bar:
                    inside = False
                    break
                dot += a_list[j] * zj
            if inside and dot <= b0:
                return z
            u, _, _ = _proj_halfspace_box(z_list, a_list, b0, u_bar)
            return np.array(u)

        return evaluate_halfspace_box

    def evaluate_generic(x):
        if not strictly_feasible(family, x):
            return None
        res = project_feasible(family, x, gain @ x, tol=tol, max_iter=max_iter)
        return res.u

    return evaluate_generic


def fixed_point_solve(grad_f, lipschitz: float, project, z, u0, gamma: float,
                      tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Solve u = project(u - gamma * grad_f(z, u)) by fixed-point iteration.

    The map is a contraction for 0 < gamma < 2 / lipschitz when f(z, .) is
    strongly convex with lipschitz-continuous gradient.
    """
    if not 0.0 < gamma < 2.0 / lipschitz:
        raise ValueError(
            f"step gamma={gamma} violates 0 < gamma < 2/L with L={lipschitz}"
        )
    u = np.asarray(u0, dtype=float).copy()
    z = np.asarray(z, dtype=float)
    residual = np.inf
    for _ in range(max_iter):
        nxt = np.asarray(project(u - gamma * np.asarray(grad_f(z, u), dtype=float)))
        residual = float(np.linalg.norm(u - nxt))
        u = nxt
        if residual <= tol:
            return u
    raise RuntimeError(
        f"fixed-point iteration did not reach tol={tol} in {max_iter} steps "
        f"(last residual {residual:.3e})"
    )
