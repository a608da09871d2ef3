"""Contraction certificates for LTI loops closed through cocoercive maps.

The certificate object is a pair (P, lambda) making the block matrix

    [ A^T P + P A + 2 eta P    P B + lambda K^T ]
    [ B^T P + lambda K        -2 lambda rho I_m ]

negative semidefinite.  Feasibility of that matrix inequality is equivalent
to the closed loop contracting at rate eta in the P-weighted norm, uniformly
over every rho-cocoercive feedback nonlinearity.  The search minimizes the
largest eigenvalue of the block by projected subgradient descent over
{P : P >= margin * I, trace P = n} x {lambda >= 0}, which is enough at the
problem sizes this package targets (n + m <= ~50).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, cholesky, is_neg_semidefinite, require_symmetric

FEASIBLE_LEVEL = -1e-9
STALL_LEVEL = 1e-7
STALL_ITERS = 500

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LtiPlant:
    """LTI pair dx/dt = A x + B u with A (n,n) and B (n,m)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        b = as_matrix(self.b, "B")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"B rows {b.shape[0]} do not match A dim {a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def input_dim(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class LureCertificate:
    """Feasible point (P, eta, lambda, rho) plus the achieved LMI top eigenvalue."""

    p: np.ndarray
    eta: float
    lam: float
    rho: float
    lmi_max_eig: float

    def to_dict(self) -> dict:
        return {
            "P": [[float(v) for v in row] for row in np.asarray(self.p)],
            "eta": float(self.eta),
            "lambda": float(self.lam),
            "rho": float(self.rho),
            "lmi_max_eig": float(self.lmi_max_eig),
        }

    @staticmethod
    def from_dict(data: dict) -> "LureCertificate":
        p = np.asarray(data["P"], dtype=float)
        if p.ndim == 1:
            n = int(round(np.sqrt(p.size)))
            p = p.reshape(n, n)
        return LureCertificate(
            p=p,
            eta=float(data["eta"]),
            lam=float(data["lambda"]),
            rho=float(data["rho"]),
            lmi_max_eig=float(data["lmi_max_eig"]),
        )


@dataclass(frozen=True)
class CertSearchConfig:
    """Rate bracket and inner-solver knobs for the feasibility search."""

    eta_lo: float = 1e-4
    eta_hi: float | None = None
    bisect_tol: float = 1e-3
    feas_margin: float = 1e-6
    max_inner_iters: int = 5000

    def __post_init__(self):
        if self.eta_lo < 0 or (self.eta_hi is not None and self.eta_hi <= self.eta_lo):
            raise ValueError("need 0 <= eta_lo < eta_hi")
        if self.bisect_tol <= 0 or self.feas_margin <= 0:
            raise ValueError("tolerances must be positive")

    def resolved_eta_hi(self, plant: LtiPlant) -> float:
        if self.eta_hi is not None:
            return self.eta_hi
        # |Re(eig(A))| <= Frobenius norm, so 2 |A|_F brackets every feasible rate
        return 2.0 * max(float(np.linalg.norm(plant.a)), self.eta_lo * 10, 1e-3)


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    lmi_max_eig: float
    p_min_eig: float


@dataclass(frozen=True)
class FeasibilitySearchResult:
    status: str
    certificate: LureCertificate | None
    best_lmi_max_eig: float
    iterations: int


@dataclass(frozen=True)
class RateSearchResult:
    status: str
    eta_star: float | None
    certificate: LureCertificate | None
    bracket: tuple[float, float]
    feasibility_solves: int = 0


@dataclass(frozen=True)
class ContractionGapReport:
    max_gap: float
    worst_pair: tuple[np.ndarray, np.ndarray]
    samples: int


def assemble_lmi(plant: LtiPlant, k, p, eta: float, lam: float, rho: float) -> np.ndarray:
    """Assemble the (n+m) x (n+m) certificate block for the given data."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    a, b = plant.a, plant.b
    k = as_matrix(k, "K")
    p = require_symmetric(p, "P")
    n, m = plant.state_dim, plant.input_dim
    if k.shape != (m, n):
        raise ValueError(f"K must be ({m},{n}), got {k.shape}")
    if p.shape != (n, n):
        raise ValueError(f"P must be ({n},{n}), got {p.shape}")
    top_left = a.T @ p + p @ a + 2.0 * eta * p
    top_right = p @ b + lam * k.T
    bottom_right = -2.0 * lam * rho * np.eye(m)
    mat = np.block([[top_left, top_right], [top_right.T, bottom_right]])
    return 0.5 * (mat + mat.T)


def verify_certificate(plant: LtiPlant, k, cert: LureCertificate,
                       tol: float = 0.0) -> tuple[bool, VerificationReport]:
    """Re-check a certificate: P positive definite, lambda >= 0, eta > 0, LMI <= tol."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    factor = cholesky(cert.p)
    p_eigs = np.linalg.eigvalsh(require_symmetric(cert.p, "P"))
    mat = assemble_lmi(plant, k, cert.p, cert.eta, cert.lam, cert.rho)
    neg, lam_max = is_neg_semidefinite(mat, tol)
    passed = factor is not None and neg and cert.lam >= 0 and cert.eta > 0
    return passed, VerificationReport(
        passed=passed, lmi_max_eig=lam_max, p_min_eig=float(p_eigs[0])
    )


def _project_trace_floor(w: np.ndarray, floor: float, total: float) -> np.ndarray:
    """Euclidean projection of eigenvalues onto {l >= floor, sum l = total}."""
    shifted = w - floor
    target = total - floor * w.size
    if target < 0:
        raise ValueError("floor exceeds trace budget")
    # water-filling: l_i = max(0, shifted_i - theta), sum = target
    srt = np.sort(shifted)[::-1]
    csum = np.cumsum(srt)
    theta = 0.0
    for kk in range(w.size, 0, -1):
        theta = (csum[kk - 1] - target) / kk
        if kk == 1 or srt[kk - 1] - theta > 0:
            break
    return np.maximum(shifted - theta, 0.0) + floor


def _project_metric(p: np.ndarray, floor: float, total: float) -> np.ndarray:
    sym = 0.5 * (p + p.T)
    w, v = np.linalg.eigh(sym)
    w_proj = _project_trace_floor(w, floor, total)
    return (v * w_proj) @ v.T


def find_certificate(plant: LtiPlant, k, rho: float, eta: float,
                     cfg: CertSearchConfig | None = None,
                     warm_start: tuple[np.ndarray, float] | None = None,
                     ) -> FeasibilitySearchResult:
    """Search for (P, lambda) certifying rate eta.

    The spectral objective t(P, lambda) = max eig of the assembled block is
    convex and is minimized by projected subgradient descent with
    Polyak-style target levels.  Cold starts near the critical rate are
    hard for a first-order method, so without a warm start the search
    climbs a ladder of easier rates first: any point certifying a rate also
    certifies every lower rate, which makes each rung a cheap warm start
    for the next.  Outcomes: feasible (certificate returned), infeasible
    (objective stalled clearly above zero), or inconclusive (iteration cap
    hit while still descending).
    """
    if eta <= 0 or rho <= 0:
        raise ValueError("eta and rho must be positive")
    cfg = cfg or CertSearchConfig()
    if warm_start is not None:
        return _subgradient_feasibility(plant, k, rho, eta, cfg, warm_start)

    total_iters = 0
    init: tuple[np.ndarray, float] | None = None
    for fraction in (0.125, 0.25, 0.5, 0.75, 0.9):
        rung = _subgradient_feasibility(plant, k, rho, fraction * eta, cfg, init)
        total_iters += rung.iterations
        if rung.status != FEASIBLE:
            break
        init = (rung.certificate.p, rung.certificate.lam)
    final = _subgradient_feasibility(plant, k, rho, eta, cfg, init)
    return FeasibilitySearchResult(final.status, final.certificate,
                                   final.best_lmi_max_eig,
                                   total_iters + final.iterations)


def _subgradient_feasibility(plant: LtiPlant, k, rho: float, eta: float,
                             cfg: CertSearchConfig,
                             warm_start: tuple[np.ndarray, float] | None,
                             ) -> FeasibilitySearchResult:
    a, b = plant.a, plant.b
    k = as_matrix(k, "K")
    n, m = plant.state_dim, plant.input_dim

    if warm_start is not None:
        p = _project_metric(np.asarray(warm_start[0], dtype=float), cfg.feas_margin, float(n))
        lam = max(0.0, float(warm_start[1]))
    else:
        p = np.eye(n)
        lam = 1.0

    f_best = np.inf
    best_point = (p, lam)
    delta = None
    path = 0.0
    path_budget = 10.0 * (1.0 + n)
    last_improve = 0

    for it in range(cfg.max_inner_iters):
        mat = assemble_lmi(plant, k, p, eta, lam, rho)
        w, v = np.linalg.eigh(mat)
        f = float(w[-1])

        if not np.isfinite(f_best) or f < f_best - 1e-12 * (1.0 + abs(f_best)):
            f_best = f
            best_point = (p, lam)
            last_improve = it
        if f <= FEASIBLE_LEVEL:
            cert = LureCertificate(p=p, eta=eta, lam=lam, rho=rho, lmi_max_eig=f)
            return FeasibilitySearchResult(FEASIBLE, cert, f, it + 1)
        if f_best > STALL_LEVEL and it - last_improve >= STALL_ITERS:
            return FeasibilitySearchResult(INFEASIBLE, None, f_best, it + 1)

        top = v[:, -1]
        vx, vu = top[:n], top[n:]
        av = a @ vx
        bu = b @ vu
        g_p = (
            np.outer(vx, av) + np.outer(av, vx)
            + 2.0 * eta * np.outer(vx, vx)
            + np.outer(bu, vx) + np.outer(vx, bu)
        )
        g_lam = 2.0 * float(vx @ (k.T @ vu)) - 2.0 * rho * float(vu @ vu)
        gnorm2 = float((g_p * g_p).sum()) + g_lam * g_lam
        if gnorm2 < 1e-30:
            # zero subgradient: f is the unconstrained minimum of the objective
            status = INFEASIBLE if f_best > STALL_LEVEL else INCONCLUSIVE
            return FeasibilitySearchResult(status, None, f_best, it + 1)

        if delta is None:
            delta = max(1e-3, 0.25 * abs(f))
        target = f_best - delta
        gnorm = np.sqrt(gnorm2)
        step = (f - target) / gnorm2
        # cap the parameter displacement so a wildly off iterate cannot blow up
        max_disp = 5.0 * (1.0 + n)
        if step * gnorm > max_disp:
            step = max_disp / gnorm
        p = _project_metric(p - step * g_p, cfg.feas_margin, float(n))
        lam = min(max(0.0, lam - step * g_lam), 1e12)
        path += step * gnorm
        if path > path_budget:
            delta = max(0.5 * delta, 1e-12)
            path = 0.0

    return FeasibilitySearchResult(INCONCLUSIVE, None, f_best, cfg.max_inner_iters)


def max_contraction_rate(plant: LtiPlant, k, rho: float = 1.0,
                         cfg: CertSearchConfig | None = None) -> RateSearchResult:
    """Maximize the certified rate by bisection on eta.

    Feasibility is monotone: raising eta only adds a positive multiple of P
    to the (1,1) block, so a rate above a failed probe never certifies.
    """
    cfg = cfg or CertSearchConfig()
    eta_lo = max(cfg.eta_lo, 1e-12)
    eta_hi = cfg.resolved_eta_hi(plant)
    solves = 0

    res_lo = find_certificate(plant, k, rho, eta_lo, cfg)
    solves += 1
    if res_lo.status != FEASIBLE:
        return RateSearchResult(
            status=res_lo.status if res_lo.status == INCONCLUSIVE else INFEASIBLE,
            eta_star=None, certificate=None, bracket=(eta_lo, eta_hi),
            feasibility_solves=solves,
        )
    best = res_lo.certificate

    res_hi = find_certificate(plant, k, rho, eta_hi, cfg,
                              warm_start=(best.p, best.lam))
    solves += 1
    if res_hi.status == FEASIBLE:
        return RateSearchResult(FEASIBLE, eta_hi, res_hi.certificate,
                                (eta_lo, eta_hi), solves)

    lo, hi = eta_lo, eta_hi
    while hi - lo > cfg.bisect_tol:
        mid = 0.5 * (lo + hi)
        res = find_certificate(plant, k, rho, mid, cfg,
                               warm_start=(best.p, best.lam))
        solves += 1
        if res.status == FEASIBLE:
            lo, best = mid, res.certificate
        else:
            hi = mid
    return RateSearchResult(FEASIBLE, lo, best, (eta_lo, eta_hi), solves)


def check_cocoercivity(phi, rho: float, sample_pairs) -> float:
    """Largest violation of rho |phi(y1)-phi(y2)|^2 <= (phi(y1)-phi(y2))^T (y1-y2).

    Nonpositive return means every sampled pair satisfies the cocoercivity
    inequality.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    pairs = list(sample_pairs)
    if not pairs:
        raise ValueError("sample_pairs must be non-empty")
    worst = -np.inf
    for y1, y2 in pairs:
        d_phi = np.asarray(phi(y1), dtype=float) - np.asarray(phi(y2), dtype=float)
        d_y = np.asarray(y1, dtype=float) - np.asarray(y2, dtype=float)
        violation = rho * float(d_phi @ d_phi) - float(d_phi @ d_y)
        worst = max(worst, violation)
    return worst


def contraction_gap(closed_loop_field, p, eta: float, sample_pairs) -> ContractionGapReport:
    """Sampled check of (F(y1)-F(y2))^T P (y1-y2) <= -eta |y1-y2|_P^2.

    max_gap <= 0 over all pairs is the sampled form of the contraction
    inequality for the frozen-constraint field.
    """
    p = require_symmetric(p, "P")
    if cholesky(p) is None:
        raise ValueError("P must be positive definite")
    pairs = list(sample_pairs)
    if not pairs:
        raise ValueError("sample_pairs must be non-empty")
    worst = -np.inf
    worst_pair = pairs[0]
    for y1, y2 in pairs:
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        d = y1 - y2
        df = np.asarray(closed_loop_field(y1), dtype=float) - np.asarray(
            closed_loop_field(y2), dtype=float
        )
        gap = float(df @ (p @ d)) + eta * float(d @ (p @ d))
        if gap > worst:
            worst = gap
            worst_pair = (y1, y2)
    return ContractionGapReport(max_gap=worst, worst_pair=worst_pair, samples=len(pairs))
