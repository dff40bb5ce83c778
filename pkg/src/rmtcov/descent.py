"""Riemannian gradient descent on the estimated squared divergence.

The objective is ``h(M) = delta_hat(M)^2`` (or its inverse-mode analogue),
minimized over SPD matrices with the affine-invariant metric. When the
initial point shares the eigenvectors of the sample covariance, every
iterate does too and the update reduces to an entrywise recursion on the
eigenvalues ``omega`` of ``M``.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (ConfigError, DomainError, NumericalError, RegimeError,
                     StallError, StepTooLargeError)
from .metrics import MetricSpec, fisher, true_delta
from .rmt import (EmpiricalSpectrum, Mode, delta_and_diag, gradient_from_eig,
                  spectrum_of)
from .spd import (check_spd, commutator_norm, eig_sym, geodesic_step,
                  geodesic_step_order2, riemannian_norm, sym)


class Target(Enum):
    COVARIANCE = "cov"
    PRECISION = "prec"

    @property
    def kernel_mode(self):
        return Mode.DIRECT if self is Target.COVARIANCE else Mode.INVERSE


class Retraction(Enum):
    EXACT = "exact"
    ORDER2 = "order2"


@dataclass(frozen=True)
class Fixed:
    """Constant step size."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError(f"fixed step must be positive, got {self.t}")


@dataclass(frozen=True)
class Backtracking:
    """Armijo search over the grid ``t0 * beta**j``, ``j = 0, 1, 2, ...``.

    The accepted step is the largest grid point satisfying the Armijo
    condition. Setting ``max_expansions`` allows ``j < 0`` (steps above
    ``t0``), and ``warm_start`` starts each search from the previously
    accepted step; both are off by default.
    """

    t0: float = 1.0
    beta: float = 0.5
    sigma: float = 1e-4
    max_halvings: int = 60
    max_expansions: int = 0
    warm_start: bool = False

    def __post_init__(self):
        if not (self.t0 > 0 and 0 < self.beta < 1 and 0 < self.sigma < 0.5):
            raise ConfigError(f"invalid backtracking parameters {self}")


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class LinearShrinkage:
    """``alpha I + sqrt(1 - alpha^2) C_hat`` with ``alpha`` in [0, 1] or ``"auto"``."""

    alpha: Union[float, str] = "auto"

    def __post_init__(self):
        if self.alpha != "auto":
            a = float(self.alpha)
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"shrinkage alpha must lie in [0, 1], got {a}")


@dataclass(frozen=True)
class Custom:
    matrix: np.ndarray


@dataclass(frozen=True)
class DescentConfig:
    """Settings of one descent run."""

    metric: MetricSpec = field(default_factory=fisher)
    target: Target = Target.COVARIANCE
    init: object = field(default_factory=LinearShrinkage)
    step: object = field(default_factory=Backtracking)
    retraction: Retraction = Retraction.EXACT
    max_iters: int = 200
    grad_tol: float = 1e-8
    objective_floor: float = 1e-14
    fast_path: bool = True

    def __post_init__(self):
        if self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative")


@dataclass
class TraceRecord:
    k: int
    h: float
    delta_hat: float
    step: float
    grad_norm: float
    true_delta: Optional[float] = None


@dataclass
class DescentTrace:
    """Per-iteration log of a descent run."""

    records: List[TraceRecord] = field(default_factory=list)
    stop_reason: str = ""
    shared_basis: bool = False

    def column(self, name):
        return np.array([getattr(r, name) if getattr(r, name) is not None else np.nan
                         for r in self.records], dtype=float)

    def to_csv(self):
        """Render as CSV with columns ``k,h,delta_hat,step,grad_norm[,true_delta]``."""
        has_true = any(r.true_delta is not None for r in self.records)
        cols = ["k", "h", "delta_hat", "step", "grad_norm"] + (["true_delta"] if has_true else [])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.records:
            row = [r.k] + [format(float(getattr(r, c)), ".17g") for c in cols[1:5]]
            if has_true:
                row.append(format(float(r.true_delta), ".17g"))
            w.writerow(row)
        return buf.getvalue()


@dataclass
class DescentState:
    """Current iterate. ``omega`` and ``basis`` are set on the fast path."""

    M: Optional[np.ndarray]
    k: int
    h: float
    delta_hat: float
    grad_norm: float
    shared_basis: bool
    basis: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None

    def matrix(self):
        if self.shared_basis:
            return sym((self.basis * self.omega) @ self.basis.T)
        return self.M


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def diag_update(omega, delta, t):
    """Entrywise geodesic update ``omega * exp(-t delta / omega)``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("omega must be positive")
    # Overflow yields inf, which the retraction rejects as leaving the cone.
    with np.errstate(over="ignore"):
        return omega * np.exp(-t * np.asarray(delta, dtype=float) / omega)


def diag_update_order2(omega, delta, t):
    """Entrywise second-order retraction ``omega - t delta + t^2 delta^2 / (2 omega)``."""
    omega = np.asarray(omega, dtype=float)
    delta = np.asarray(delta, dtype=float)
    out = omega - t * delta + 0.5 * t * t * delta * delta / omega
    if np.any(out <= 0):
        raise StepTooLargeError(f"order-2 retraction left the SPD cone at t={t}")
    return out


def frobenius_shrinkage_alpha(C_hat, n, X=None):
    """Data-driven ``alpha`` minimizing a consistent Frobenius risk estimate.

    The risk of ``alpha I + b C_hat`` with ``b = sqrt(1 - alpha^2)`` is, up to
    terms free of ``alpha``,
    ``alpha^2 p + b^2 |C_hat|^2 - 2 alpha tr C_hat - 2 b a2 + 2 alpha b tr C_hat``
    where ``a2`` estimates ``|C|^2`` as ``|C_hat|^2`` minus the sampling
    dispersion ``(1/n^2) sum_i |x_i x_i^T - C_hat|^2``. Without samples a
    Gaussian moment formula replaces the dispersion.
    """
    C_hat = sym(C_hat)
    p = C_hat.shape[0]
    fro2 = float(np.sum(C_hat * C_hat))
    tr = float(np.trace(C_hat))
    if X is not None:
        X = np.asarray(X, dtype=float)
        norms2 = np.sum(X * X, axis=0)
        # |x x^T - S|^2 = |x|^4 - 2 x^T S x + |S|^2
        quad = np.einsum("in,ij,jn->n", X, C_hat, X)
        disp = float(np.sum(norms2 ** 2 - 2.0 * quad + fro2)) / X.shape[1] ** 2
    else:
        disp = (fro2 + tr * tr) / n
    a2 = max(fro2 - disp, 0.0)

    def risk(theta):
        # alpha = cos(theta), sqrt(1 - alpha^2) = sin(theta)
        a, b = np.cos(theta), np.sin(theta)
        return a * a * p + b * b * fro2 - 2.0 * a * tr - 2.0 * b * a2 + 2.0 * a * b * tr

    # The risk is not convex in alpha: locate the global minimum on a grid,
    # then refine inside the neighbouring cells.
    grid = np.linspace(0.0, 0.5 * np.pi, 2049)
    j = int(np.argmin(risk(grid)))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = scipy.optimize.minimize_scalar(risk, bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12})
    theta = res.x if risk(res.x) <= risk(grid[j]) else grid[j]
    return float(np.clip(np.cos(theta), 0.0, 1.0))


def linear_shrinkage_init(C_hat, n, alpha="auto", X=None):
    """Linear shrinkage ``alpha I + sqrt(1 - alpha^2) C_hat``.

    Parameters
    ----------
    C_hat : ndarray, shape (p, p)
    n : int
    alpha : float in [0, 1] or "auto"
    X : ndarray, shape (p, n), optional
        Samples behind ``C_hat``; sharpens the "auto" intensity.
    """
    C_hat = sym(C_hat)
    if alpha == "auto":
        alpha = frobenius_shrinkage_alpha(C_hat, n, X)
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    p = C_hat.shape[0]
    return alpha * np.eye(p) + math.sqrt(1.0 - alpha * alpha) * C_hat


def sample_covariance(X, center=False):
    """Return ``(C_hat, n_eff)`` for a ``p x n`` sample matrix.

    Without centering ``C_hat = X X^T / n``. With centering the empirical mean
    is removed and ``n - 1`` is used both as normalization and as the
    effective sample size.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ConfigError("samples must be a p x n matrix")
    p, n = X.shape
    if center:
        Xc = X - X.mean(axis=1, keepdims=True)
        return sym(Xc @ Xc.T / (n - 1)), n - 1
    return sym(X @ X.T / n), n


def initial_point(config, C_hat, n, X=None):
    """Starting matrix for the configured target and initializer."""
    p = C_hat.shape[0]
    init = config.init
    if isinstance(init, Identity):
        return np.eye(p)
    if isinstance(init, LinearShrinkage):
        S = linear_shrinkage_init(C_hat, n, init.alpha, X)
        if config.target is Target.PRECISION:
            e = eig_sym(S)
            return e.reconstruct(lambda w: 1.0 / w)
        return S
    if isinstance(init, Custom):
        M0 = check_spd(init.matrix, "initial matrix")
        if M0.shape != C_hat.shape:
            raise ConfigError("initial matrix has the wrong dimension")
        return M0
    raise ConfigError(f"unknown initializer {init!r}")


# ---------------------------------------------------------------------------
# Objective evaluators
# ---------------------------------------------------------------------------

class _FullEvaluator:
    """Objective and gradient for a general SPD iterate."""

    def __init__(self, C_hat, n, metric, target, retraction):
        self.C_hat = C_hat
        self.n = n
        self.metric = metric
        self.mode = target.kernel_mode
        self.retraction = retraction

    def evaluate(self, M):
        es, eig = spectrum_of(M, self.C_hat, self.n, self.mode)
        delta, diag, _ = delta_and_diag(es, self.metric)
        G = 2.0 * delta * gradient_from_eig(eig, self.C_hat, M, diag, self.mode)
        return delta, G, riemannian_norm(M, G)

    def retract(self, M, G, t):
        if self.retraction is Retraction.EXACT:
            return geodesic_step(M, G, t)
        return geodesic_step_order2(M, G, t)


class _DiagEvaluator:
    """Objective and gradient when ``M = U diag(omega) U^T`` with ``U`` from ``C_hat``."""

    def __init__(self, lam_hat, n, metric, target, retraction):
        self.lam_hat = lam_hat
        self.n = n
        self.metric = metric
        self.mode = target.kernel_mode
        self.retraction = retraction

    def evaluate(self, omega):
        if self.mode is Mode.DIRECT:
            lam = self.lam_hat / omega
        else:
            lam = self.lam_hat * omega
        order = np.argsort(lam, kind="stable")
        es = EmpiricalSpectrum(lam[order], self.n, self.mode)
        delta, diag_sorted, _ = delta_and_diag(es, self.metric)
        diag = np.empty_like(diag_sorted)
        diag[order] = diag_sorted
        if self.mode is Mode.DIRECT:
            Delta = 2.0 * delta * self.lam_hat * diag
        else:
            Delta = 2.0 * delta * diag * omega
        return delta, Delta, float(np.linalg.norm(Delta / omega))

    def retract(self, omega, Delta, t):
        if self.retraction is Retraction.EXACT:
            out = diag_update(omega, Delta, t)
        else:
            out = diag_update_order2(omega, Delta, t)
        if not np.all(np.isfinite(out)) or np.any(out <= 0):
            raise StepTooLargeError("iterate left the SPD cone")
        return out


def _safe_eval(evaluator, point):
    try:
        delta, G, gn = evaluator.evaluate(point)
    except (NumericalError, DomainError, np.linalg.LinAlgError, FloatingPointError):
        return None
    if not (np.isfinite(delta) and np.isfinite(gn)):
        return None
    return delta, G, gn


def backtracking_step(evaluator, point, h, G, grad_norm, policy, t_start=None):
    """Armijo search returning ``(t, new_point, (delta, G, grad_norm))``.

    Accepts the largest ``t = t0 beta^j`` with
    ``h(R(point, G, t)) <= h - sigma t |G|^2``.

    Raises
    ------
    StallError
        If ``max_halvings`` reductions below the starting step all fail.
    """
    t0 = policy.t0
    t = t0 if t_start is None else t_start
    thresh = policy.sigma * grad_norm * grad_norm

    def attempt(t):
        try:
            cand = evaluator.retract(point, G, t)
        except (StepTooLargeError, NumericalError, DomainError, FloatingPointError,
                np.linalg.LinAlgError):
            return None
        res = _safe_eval(evaluator, cand)
        if res is None:
            return None
        if res[0] * res[0] <= h - thresh * t:
            return cand, res
        return None

    got = attempt(t)
    if got is not None:
        for _ in range(policy.max_expansions):
            bigger = attempt(t / policy.beta)
            if bigger is None:
                break
            t = t / policy.beta
            got = bigger
        return t, got[0], got[1]
    for _ in range(policy.max_halvings):
        t *= policy.beta
        got = attempt(t)
        if got is not None:
            return t, got[0], got[1]
    raise StallError(f"no Armijo decrease after {policy.max_halvings} halvings")


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _shares_basis(M0, C_hat, U):
    scale = max(np.linalg.norm(M0) * np.linalg.norm(C_hat), 1e-300)
    if commutator_norm(M0, C_hat) > 1e-12 * scale:
        return False
    R = U.T @ M0 @ U
    off = R - np.diag(np.diag(R))
    return bool(np.linalg.norm(off) <= 1e-12 * max(np.linalg.norm(M0), 1e-300))


def estimate_from_scm(C_hat, n, config=DescentConfig(), C_true=None, X=None,
                      callback: Optional[Callable[[DescentState], None]] = None):
    """Run the descent from a sample covariance.

    Parameters
    ----------
    C_hat : ndarray, shape (p, p)
        Sample covariance.
    n : int
        Effective sample size, must exceed ``p``.
    config : DescentConfig
    C_true : ndarray, optional
        Population covariance. When given, the trace records the true
        divergence to ``C`` (covariance target) or ``C^{-1}`` (precision).
    X : ndarray, optional
        Samples, used by the "auto" shrinkage intensity.
    callback : callable, optional
        Called with the state after initialization and after each step.

    Returns
    -------
    M : ndarray
        Estimate of ``C`` or ``C^{-1}``.
    trace : DescentTrace
    """
    C_hat = check_spd(C_hat, "sample covariance")
    p = C_hat.shape[0]
    if not p < n:
        raise RegimeError(f"need p < n, got p={p}, n={n}")
    M0 = initial_point(config, C_hat, n, X)
    eh = eig_sym(C_hat)
    fast = config.fast_path and _shares_basis(M0, C_hat, eh.vectors)

    if C_true is not None:
        C_true = check_spd(C_true, "population covariance")
        ref = C_true
        if config.target is Target.PRECISION:
            ref = eig_sym(C_true).reconstruct(lambda w: 1.0 / w)
        if fast:
            ref_rot = sym(eh.vectors.T @ ref @ eh.vectors)

    def truth(point):
        if C_true is None:
            return None
        if fast:
            r = 1.0 / np.sqrt(point)
            lam = scipy.linalg.eigvalsh(ref_rot * np.outer(r, r))
            return float(np.mean(config.metric.eval_f(lam)))
        return true_delta(point, ref, config.metric)

    if fast:
        evaluator = _DiagEvaluator(eh.values, n, config.metric, config.target,
                                   config.retraction)
        point = np.diag(eh.vectors.T @ M0 @ eh.vectors).copy()
    else:
        evaluator = _FullEvaluator(C_hat, n, config.metric, config.target,
                                   config.retraction)
        point = M0

    def make_state(point, k, delta, gn):
        if fast:
            return DescentState(None, k, delta * delta, delta, gn, True,
                                eh.vectors, point)
        return DescentState(point, k, delta * delta, delta, gn, False)

    delta, G, gn = evaluator.evaluate(point)
    trace = DescentTrace(shared_basis=fast)
    trace.records.append(TraceRecord(0, delta * delta, delta, 0.0, gn, truth(point)))
    state = make_state(point, 0, delta, gn)
    if callback is not None:
        callback(state)

    t_prev = None
    reason = "max_iters"
    for k in range(1, config.max_iters + 1):
        h = delta * delta
        if h <= config.objective_floor:
            reason = "objective_floor"
            break
        if gn <= config.grad_tol:
            reason = "grad_tol"
            break
        if isinstance(config.step, Fixed):
            t = config.step.t
            new_point = evaluator.retract(point, G, t)
            res = evaluator.evaluate(new_point)
        else:
            try:
                t, new_point, res = backtracking_step(
                    evaluator, point, h, G, gn, config.step,
                    t_prev if config.step.warm_start else None)
            except StallError as exc:
                trace.stop_reason = "stall"
                raise StallError(str(exc), trace) from exc
            t_prev = t
        point = new_point
        delta, G, gn = res
        trace.records.append(TraceRecord(k, delta * delta, delta, t, gn, truth(point)))
        state = make_state(point, k, delta, gn)
        if callback is not None:
            callback(state)
    else:
        h = delta * delta
        if h <= config.objective_floor:
            reason = "objective_floor"
        elif gn <= config.grad_tol:
            reason = "grad_tol"
    trace.stop_reason = reason
    return state.matrix(), trace


def estimate(X, config=DescentConfig(), C_true=None, center=False, callback=None):
    """Estimate ``C`` (or ``C^{-1}``) from a ``p x n`` sample matrix.

    Raises
    ------
    RegimeError
        If ``p >= n``.
    StallError
        If the line search cannot decrease the objective.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ConfigError("samples must be a p x n matrix")
    p, n = X.shape
    if not p < n:
        raise RegimeError(f"need p < n, got p={p}, n={n}")
    C_hat, n_eff = sample_covariance(X, center)
    Xs = X - X.mean(axis=1, keepdims=True) if center else X
    return estimate_from_scm(C_hat, n_eff, config, C_true, Xs, callback)
