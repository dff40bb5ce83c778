"""Random-matrix estimators of spectral divergences and their gradients.

Given a sample covariance ``C_hat`` built from ``n`` samples and a candidate
matrix ``M``, the eigenvalues ``lambda`` of ``M^{-1} C_hat`` (direct mode) or
of ``M C_hat`` (inverse mode) determine consistent estimates of
``delta(M, C)`` or ``delta(M, C^{-1})``. The estimate is a contour integral
of ``G(-m(z))`` (direct) or ``F(-m(z))`` (inverse) where ``m`` is the
Stieltjes transform of ``(p/n) mu_p + (1 - p/n) delta_0``.

Two backends are provided. The quadrature backend integrates along a
rectangle and serves as reference. The closed-form backend evaluates the
residues and branch-cut integrals analytically through the auxiliary
spectrum ``xi`` (zeros of ``m``) and, for the shifted logarithm, the negative
root ``kappa_s`` of ``m(t) = s``.

Sign conventions
----------------
``MINUS_OVER_Z`` is ``m(t) = (1/n) sum 1/(lambda_i - t) - (1 - c)/t``, the
transform of the measure above. ``PLUS_OVER_Z`` flips the sign of the last
term. Every formula here uses ``MINUS_OVER_Z``: it is the only convention
for which ``m(xi_i) = 0`` and for which finite differences of the estimator
agree with the analytic gradients. ``PLUS_OVER_Z`` is exposed for
comparison only.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.optimize
from scipy.special import spence

from .errors import (BracketError, DegenerateSpectrumError, DimensionError,
                     DomainError, IllConditionedError, IntegrationError,
                     NumericalError, PoleError, RegimeError)
from .metrics import AtomKind, eval_F, eval_G, eval_f
from .spd import EigenPair, eig_pencil, eig_sym, sym


class Mode(Enum):
    DIRECT = "direct"
    INVERSE = "inverse"


class Convention(Enum):
    MINUS_OVER_Z = -1
    PLUS_OVER_Z = 1


#: Relative gap below which eigenvalues count as coincident.
DEGENERACY_TOL = 1e-12
#: Relative spacing used to split coincident eigenvalues.
JITTER = 1e-10


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """Sorted eigenvalues of ``M^{-1} C_hat`` (or ``M C_hat``) and sample size.

    Attributes
    ----------
    lambdas : ndarray, shape (p,)
        Positive eigenvalues in ascending order.
    n : int
        Number of samples behind ``C_hat``.
    mode : Mode
    """

    lambdas: np.ndarray
    n: int
    mode: Mode = Mode.DIRECT

    def __post_init__(self):
        lam = np.sort(np.asarray(self.lambdas, dtype=float).ravel())
        if lam.size == 0:
            raise DimensionError("empty spectrum")
        if not np.all(np.isfinite(lam)) or lam[0] <= 0:
            raise DomainError("spectrum must be finite and positive")
        if not lam.size < self.n:
            raise RegimeError(f"need p < n, got p={lam.size}, n={self.n}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def p(self):
        return self.lambdas.size

    @property
    def c_tilde(self):
        return self.p / self.n


@dataclass(frozen=True)
class SpectrumAux:
    """Zeros ``xi`` of the companion Stieltjes transform, ascending.

    ``cache`` holds intermediate arrays shared by the estimate and the
    gradient of the same spectrum.
    """

    xis: np.ndarray
    owner: EmpiricalSpectrum
    cache: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass(frozen=True)
class ContourSpec:
    """Axis-aligned rectangle ``[a, b] x [-h, h]`` with ``nodes`` per side."""

    a: float
    b: float
    h: float
    nodes: int = 4096

    def __post_init__(self):
        if not (0 < self.a < self.b and self.h > 0 and self.nodes >= 2):
            raise DomainError(f"invalid contour {self}")


@dataclass(frozen=True)
class GradientDiag:
    """Diagonal of the gradient kernel for one atom."""

    diag: np.ndarray
    atom: object
    mode: Mode


# ---------------------------------------------------------------------------
# Stieltjes transform, auxiliary spectrum and kappa
# ---------------------------------------------------------------------------

def _check_poles(t, lam):
    t = np.asarray(t)
    if np.any(t == 0) or np.any(np.isin(t, lam)):
        raise PoleError("Stieltjes transform evaluated at a pole")


def stieltjes_tilde(t, spec, convention=Convention.MINUS_OVER_Z):
    """Companion Stieltjes transform at real or complex ``t``.

    Returns ``c (1/p) sum 1/(lambda_i - t) + sigma (1 - c)/t`` with ``sigma``
    equal to ``-1`` for ``MINUS_OVER_Z`` and ``+1`` for ``PLUS_OVER_Z``.
    """
    lam = spec.lambdas
    _check_poles(t, lam)
    t_arr = np.asarray(t)
    c = spec.c_tilde
    body = np.sum(1.0 / (lam - t_arr[..., None]), axis=-1) / spec.n
    out = body + convention.value * (1.0 - c) / t_arr
    return out if out.ndim else out[()]


def stieltjes_tilde_deriv(t, spec, convention=Convention.MINUS_OVER_Z):
    """Derivative in ``t`` of :func:`stieltjes_tilde`."""
    lam = spec.lambdas
    _check_poles(t, lam)
    t_arr = np.asarray(t)
    c = spec.c_tilde
    body = np.sum(1.0 / (lam - t_arr[..., None]) ** 2, axis=-1) / spec.n
    out = body - convention.value * (1.0 - c) / t_arr ** 2
    return out if out.ndim else out[()]


def xi_spectrum(spec, check=True):
    """Eigenvalues of ``diag(lambda) - (1/n) sqrt(lambda) sqrt(lambda)^T``.

    These interlace with ``lambda`` (with ``lambda_0 = 0``) and are the zeros
    of the ``MINUS_OVER_Z`` transform. When ``check`` is set, each ``xi`` that
    is separated from the poles is verified to be a zero by bounding the
    Newton correction.
    """
    lam = spec.lambdas
    r = np.sqrt(lam)
    A = np.diag(lam) - np.outer(r, r) / spec.n
    try:
        xi = scipy.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"auxiliary eigensolver failed: {exc}") from exc
    xi = _refine_secular(xi, lam, spec.n)
    if check:
        _check_secular(xi, spec)
    return SpectrumAux(xi, spec)


def _refine_secular(xi, lam, n, iters=8):
    """Polish eigensolver roots of ``1 = (1/n) sum lam_j / (lam_j - xi)``.

    Each root is written as ``anchor + u`` with ``anchor`` its nearer
    bracketing pole (or 0), so that ``lam_j - xi`` is formed without
    cancellation. Newton steps are safeguarded by bisection.
    """
    lower = np.concatenate(([0.0], lam[:-1]))
    upper = lam
    usable = (upper > lower) & (xi > lower) & (xi < upper)
    if not np.any(usable):
        return xi
    anchor = np.where(xi - lower < upper - xi, lower, upper)
    D = lam[None, :] - anchor[:, None]
    u = xi - anchor
    lo, hi = lower - anchor, upper - anchor
    active = usable.copy()
    for _ in range(iters):
        with np.errstate(divide="ignore", invalid="ignore"):
            R = lam[None, :] / (D - u[:, None])
            f = 1.0 - R.sum(axis=1) / n
            df = -(R / (D - u[:, None])).sum(axis=1) / n
            lo = np.where(f > 0, u, lo)
            hi = np.where(f < 0, u, hi)
            nxt = u - f / df
        bad = ~np.isfinite(nxt) | (nxt < lo) | (nxt > hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = (f == 0) | (np.abs(nxt - u) <= 4 * np.finfo(float).eps * np.abs(anchor + u))
        u = np.where(active & (f != 0), nxt, u)
        active &= ~done
        if not np.any(active):
            break
    return np.where(usable, anchor + u, xi)


def _check_secular(xi, spec):
    lam = spec.lambdas
    scale = lam[-1]
    gap = np.min(np.abs(xi[:, None] - lam[None, :]), axis=1)
    ok = (gap > 1e-8 * scale) & (xi > 0)
    if not np.any(ok):
        return
    x = xi[ok]
    m = stieltjes_tilde(x, spec)
    dm = stieltjes_tilde_deriv(x, spec)
    step = np.abs(m / dm)
    if np.any(step > 1e-7 * np.maximum(gap[ok], 1e-300)) and np.any(step > 1e-10 * scale):
        raise NumericalError("auxiliary spectrum failed the secular check")


def kappa(s, spec, convention=Convention.MINUS_OVER_Z):
    """Negative root used by the shifted-logarithm atom.

    In direct mode the target is ``s``; in inverse mode it is ``1/s``.
    Under ``MINUS_OVER_Z`` the root solves ``m(t) = target`` and lies in
    ``[-1/target, -(1 - c)/target]``. Under ``PLUS_OVER_Z`` the root solves
    ``m(t) = -target`` in ``(-1/(target (1 - c)), 0)``.

    Raises
    ------
    BracketError
        If the bracket shows no sign change.
    """
    s = float(s)
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    target = s if spec.mode is Mode.DIRECT else 1.0 / s
    c = spec.c_tilde
    if convention is Convention.MINUS_OVER_Z:
        def fun(t):
            return stieltjes_tilde(t, spec, convention) - target
        lo, hi = -1.0 / target, -(1.0 - c) / target
    else:
        def fun(t):
            return stieltjes_tilde(t, spec, convention) + target
        lo = -1.0 / (target * (1.0 - c))
        hi = lo * 1e-15
    f_lo, f_hi = fun(lo), fun(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: residuals {f_lo:.3g}, {f_hi:.3g}")
    root = scipy.optimize.brentq(fun, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                 maxiter=500)
    # One Newton polish keeps the residual at round-off level.
    d = stieltjes_tilde_deriv(root, spec, convention)
    cand = root - fun(root) / d
    if lo <= cand <= hi and abs(fun(cand)) < abs(fun(root)):
        root = cand
    return float(root)


# ---------------------------------------------------------------------------
# Spectrum construction and degeneracy handling
# ---------------------------------------------------------------------------

def _is_degenerate(lam, xi):
    scale = lam[-1]
    if np.any(np.diff(lam) <= DEGENERACY_TOL * scale):
        return True
    d1 = np.abs(lam - xi)
    d2 = np.abs(lam[:-1] - xi[1:])
    return bool(np.min(d1) <= DEGENERACY_TOL * scale
                or (d2.size and np.min(d2) <= DEGENERACY_TOL * scale)
                or xi[0] <= 0)


def jitter_spectrum(spec):
    """Split coincident eigenvalues by a relative spacing of ``JITTER``."""
    lam = spec.lambdas * (1.0 + JITTER * np.arange(spec.p))
    return EmpiricalSpectrum(lam, spec.n, spec.mode)


def prepare(spec):
    """Return ``(spec, aux)`` ready for closed-form evaluation.

    Coincident eigenvalues (a measure-zero event for continuous data) are
    split by :func:`jitter_spectrum` before recomputing ``xi``.

    Raises
    ------
    DegenerateSpectrumError
        If the spectrum stays degenerate after jittering.
    """
    aux = xi_spectrum(spec, check=False)
    if _is_degenerate(spec.lambdas, aux.xis):
        spec = jitter_spectrum(spec)
        aux = xi_spectrum(spec, check=False)
        if _is_degenerate(spec.lambdas, aux.xis):
            raise DegenerateSpectrumError("spectrum degenerate after jitter")
    return spec, aux


def _require_nondegenerate(spec, aux):
    if _is_degenerate(spec.lambdas, aux.xis):
        raise DegenerateSpectrumError(
            "lambda and xi coincide within tolerance; jitter the spectrum first")


def eig_product(M, C_hat):
    """Eigendecomposition of ``M C_hat`` with a basis satisfying ``V^{-1} = V^T M^{-1}``."""
    M = sym(M)
    C_hat = sym(C_hat)
    if M.shape != C_hat.shape:
        raise DimensionError(f"shape mismatch {M.shape} vs {C_hat.shape}")
    em = eig_sym(M)
    if em.values[0] <= 0 or em.values[-1] / em.values[0] > 1e12:
        raise IllConditionedError("M is numerically singular")
    Ms = (em.vectors * np.sqrt(em.values)) @ em.vectors.T
    inner = eig_sym(Ms @ C_hat @ Ms)
    Minv = (em.vectors / em.values) @ em.vectors.T
    return EigenPair(inner.values, Ms @ inner.vectors, Minv)


def spectrum_of(M, C_hat, n, mode=Mode.DIRECT):
    """Build the empirical spectrum and eigenbasis for ``(M, C_hat)``."""
    if mode is Mode.DIRECT:
        eig = eig_pencil(C_hat, M)
    else:
        eig = eig_product(M, C_hat)
    return EmpiricalSpectrum(eig.values, n, mode), eig


# ---------------------------------------------------------------------------
# Closed-form estimators
# ---------------------------------------------------------------------------

def _li2(x):
    """Real dilogarithm for ``x <= 1``."""
    return spence(1.0 - x)


def _logdiff_quotient(x, y):
    """``(log x - log y) / (x - y)`` evaluated stably, ``1/y`` on the diagonal."""
    u = (x - y) / y
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(u == 0.0, 1.0, np.log1p(u) / np.where(u == 0.0, 1.0, u))
    return q / y


def _closed_linear(lam, n, aux):
    return float(np.mean(lam))


def _closed_reciprocal(lam, n, aux):
    c = lam.size / n
    return float((1.0 - c) * np.mean(1.0 / lam))


def _closed_log(lam, n, aux):
    c = lam.size / n
    return float(np.mean(np.log(lam)) + (1.0 - c) / c * np.log1p(-c) + 1.0)


def _closed_logshift(lam, n, aux, k, s):
    c = lam.size / n
    return float(np.mean(np.log(s * (lam - k))) + (1.0 + s * k) / c
                 + (1.0 - c) / c * np.log(-s * k))


def _log_quotients(lam, aux):
    """``(D_lam, D_xi)`` log-difference quotient matrices, cached on ``aux``."""
    key = ("logdiff", lam.tobytes())
    if key not in aux.cache:
        aux.cache.clear()
        aux.cache[key] = (_logdiff_quotient(lam[:, None], lam[None, :]),
                          _logdiff_quotient(lam[:, None], aux.xis[None, :]))
    return aux.cache[key]


def _closed_log2(lam, n, aux):
    p = lam.size
    c = p / n
    xi = aux.xis
    L = np.log(lam)
    K = np.log(xi)
    Dl, Dx = _log_quotients(lam, aux)
    S = (lam[:, None] * (Dl - Dx)
         + _li2(1.0 - lam[None, :] / lam[:, None])
         - _li2(1.0 - xi[None, :] / lam[:, None]))
    l1c = np.log1p(-c)
    t1 = np.sum(L * L + 2.0 * L) / n
    t2 = 2.0 / n * (S.sum() - p * l1c) - (1.0 - c) * np.sum(L * L - K * K)
    t3 = -(1.0 - c) * l1c * l1c
    return float((t1 + t2 + t3) / c)


def _atom_closed_direct(atom, spec, aux, s_override=None):
    lam, n = spec.lambdas, spec.n
    if atom.kind is AtomKind.LINEAR:
        return _closed_linear(lam, n, aux)
    if atom.kind is AtomKind.LOG:
        return _closed_log(lam, n, aux)
    if atom.kind is AtomKind.LOG_SHIFT:
        s = atom.s if s_override is None else s_override
        k = kappa(s, EmpiricalSpectrum(lam, n, Mode.DIRECT))
        return _closed_logshift(lam, n, aux, k, s)
    return _closed_log2(lam, n, aux)


def atom_estimate(atom, spec, aux=None):
    """Closed-form estimate of ``(1/p) sum f(.)`` for a single atom.

    In inverse mode the atom ``f`` is handled as the direct estimate of
    ``t -> f(1/t)`` on the spectrum of ``M C_hat``: ``t`` maps to ``1/t``,
    ``log`` changes sign, ``log^2`` is unchanged and
    ``log(1 + s/t) = log(1 + t/s) + log s - log t``.
    """
    if aux is None:
        spec, aux = prepare(spec)
    if spec.mode is Mode.DIRECT:
        return _atom_closed_direct(atom, spec, aux)
    lam, n = spec.lambdas, spec.n
    if atom.kind is AtomKind.LINEAR:
        return _closed_reciprocal(lam, n, aux)
    if atom.kind is AtomKind.LOG:
        return -_closed_log(lam, n, aux)
    if atom.kind is AtomKind.LOG_SHIFT:
        s = atom.s
        k = kappa(s, spec)
        return (_closed_logshift(lam, n, aux, k, 1.0 / s) + np.log(s)
                - _closed_log(lam, n, aux))
    return _closed_log2(lam, n, aux)


def estimate_from_spectrum(spec, metric, backend="closed", aux=None, **quad_kw):
    """Divergence estimate for a spectrum, combining atoms and constant."""
    if backend == "closed":
        if aux is None:
            spec, aux = prepare(spec)
        vals = [w * atom_estimate(a, spec, aux) for w, a in metric.terms]
    elif backend == "quadrature":
        vals = [w * quadrature_estimate(a, spec, **quad_kw) for w, a in metric.terms]
    else:
        raise DomainError(f"unknown backend {backend!r}")
    return float(metric.constant + sum(vals))


def estimate_delta(M, C_hat, n, spec, backend="closed", **quad_kw):
    """Consistent estimate of ``delta(M, C)`` from ``C_hat`` with ``n`` samples.

    Parameters
    ----------
    M, C_hat : ndarray, shape (p, p)
        SPD candidate and sample covariance.
    n : int
        Sample size, must exceed ``p``.
    spec : MetricSpec
    backend : {"closed", "quadrature"}

    Returns
    -------
    float
        The estimate, which can be negative.
    """
    es, _ = spectrum_of(M, C_hat, n, Mode.DIRECT)
    return estimate_from_spectrum(es, spec, backend, **quad_kw)


def estimate_delta_inv(M, C_hat, n, spec, backend="closed", **quad_kw):
    """Consistent estimate of ``delta(M, C^{-1})`` from the spectrum of ``M C_hat``."""
    es, _ = spectrum_of(M, C_hat, n, Mode.INVERSE)
    return estimate_from_spectrum(es, spec, backend, **quad_kw)


# ---------------------------------------------------------------------------
# Quadrature backend
# ---------------------------------------------------------------------------

def default_contour(spec, aux=None, nodes=4096):
    """Rectangle ``[0.5 min(lambda, xi), 1.5 max lambda] x [-h, h]``, ``h = 0.5 min lambda``."""
    if aux is None:
        aux = xi_spectrum(spec, check=False)
    lam = spec.lambdas
    a = 0.5 * min(lam[0], aux.xis[0])
    return ContourSpec(a, 1.5 * lam[-1], 0.5 * lam[0], nodes)


def _contour_nodes(contour):
    a, b, h, N = contour.a, contour.b, contour.h, contour.nodes
    corners = [complex(a, -h), complex(b, -h), complex(b, h), complex(a, h), complex(a, -h)]
    tt = np.linspace(0.0, 1.0, N + 1)
    wts = np.full(N + 1, 1.0 / N)
    wts[0] = wts[-1] = 0.5 / N
    zs, ws = [], []
    for z0, z1 in zip(corners[:-1], corners[1:]):
        zs.append(z0 + (z1 - z0) * tt)
        ws.append(wts * (z1 - z0))
    return np.concatenate(zs), np.concatenate(ws)


def _winding(values):
    """Branch offsets keeping ``log(values)`` continuous along a path."""
    ang = np.angle(values)
    unwrapped = np.unwrap(ang)
    unwrapped += ang[0] - unwrapped[0]
    return np.rint((unwrapped - ang) / (2.0 * np.pi)).astype(int)


def contour_integral(atom, spec, contour):
    """Trapezoid rule for ``(1/(2 pi i c)) oint H(-m(z)) dz`` on one contour.

    ``H`` is ``G`` in direct mode and ``F`` in inverse mode.
    """
    z, wz = _contour_nodes(contour)
    w = -stieltjes_tilde(z, spec)
    k = _winding(w)
    if atom.kind is AtomKind.LOG_SHIFT:
        shifted = atom.s + w if spec.mode is Mode.DIRECT else 1.0 + atom.s * w
        ks = _winding(shifted)
    else:
        ks = 0
    H = eval_G if spec.mode is Mode.DIRECT else eval_F
    vals = H(atom, w, k, ks)
    total = np.sum(vals * wz) / (2j * np.pi * spec.c_tilde)
    return float(total.real)


def quadrature_estimate(atom, spec, contour=None, tol=1e-8, max_nodes=2 ** 20,
                        refine=True):
    """Reference estimate by contour quadrature with node doubling.

    Parameters
    ----------
    atom : Atom
    spec : EmpiricalSpectrum
    contour : ContourSpec, optional
        Defaults to :func:`default_contour`.
    tol : float
        Stop when successive refinements differ by less than ``tol``.
    max_nodes : int
        Upper bound on nodes per side.
    refine : bool
        If false, evaluate once on ``contour`` without doubling.

    Raises
    ------
    IntegrationError
        If ``max_nodes`` is reached before convergence.
    """
    if contour is None:
        contour = default_contour(spec)
    prev = contour_integral(atom, spec, contour)
    if not refine:
        return prev
    N = contour.nodes
    while True:
        N *= 2
        if N > max_nodes:
            raise IntegrationError(f"quadrature not converged at {max_nodes} nodes")
        cur = contour_integral(
            atom, spec, ContourSpec(contour.a, contour.b, contour.h, N))
        # Trapezoid error is O(N^-2): Richardson extrapolation sharpens it.
        if abs(cur - prev) < tol:
            return cur + (cur - prev) / 3.0
        prev = cur


# ---------------------------------------------------------------------------
# Gradient diagonals
# ---------------------------------------------------------------------------

def _diag_log2(spec, aux):
    lam = spec.lambdas
    p = lam.size
    c = spec.c_tilde
    L = np.log(lam)
    Dl, Dx = _log_quotients(lam, aux)
    # The diagonal of Dl equals 1/lambda and is excluded from the sum.
    core = Dx.sum(axis=1) - (Dl.sum(axis=1) - 1.0 / lam) - L / lam
    return 2.0 / p * core - (2.0 - 2.0 * np.log1p(-c)) / (p * lam)


def grad_diag(atom, spec, aux):
    """Gradient kernel diagonal for the direct estimator.

    With ``V`` the M-orthonormal eigenbasis of ``M^{-1} C_hat``, the
    Riemannian gradient of the estimate is ``C_hat V diag(d) V^{-1}`` where
    ``d_k = -(d estimate / d lambda_k)``.

    Raises
    ------
    DegenerateSpectrumError
        If some ``lambda_k`` and ``xi_i`` coincide.
    """
    if spec.mode is not Mode.DIRECT:
        raise DomainError("grad_diag expects a direct-mode spectrum")
    _require_nondegenerate(spec, aux)
    lam = spec.lambdas
    p = lam.size
    if atom.kind is AtomKind.LINEAR:
        c = spec.c_tilde
        xi = aux.xis
        dm = stieltjes_tilde_deriv(xi, spec)
        d = -1.0 / c + np.sum(1.0 / (dm[None, :] * (lam[:, None] - xi[None, :]) ** 2),
                              axis=1) / p
    elif atom.kind is AtomKind.LOG:
        d = -1.0 / (p * lam)
    elif atom.kind is AtomKind.LOG_SHIFT:
        k = kappa(atom.s, spec)
        d = -1.0 / (p * (lam - k))
    else:
        d = _diag_log2(spec, aux)
    return GradientDiag(d, atom, Mode.DIRECT)


def grad_diag_inv(atom, spec, aux):
    """Gradient kernel diagonal for the inverse estimator.

    With ``V`` the eigenbasis of ``M C_hat``, the Riemannian gradient of the
    estimate is ``V diag(d) V^{-1} M`` where ``d_k = lambda_k (d estimate /
    d lambda_k)``. The log and shifted-log entries carry a ``1/p`` factor
    like every other atom, as confirmed by finite differences.
    """
    if spec.mode is not Mode.INVERSE:
        raise DomainError("grad_diag_inv expects an inverse-mode spectrum")
    _require_nondegenerate(spec, aux)
    lam = spec.lambdas
    p = lam.size
    c = spec.c_tilde
    if atom.kind is AtomKind.LINEAR:
        d = -(1.0 - c) / (p * lam)
    elif atom.kind is AtomKind.LOG:
        d = np.full(p, -1.0 / p)
    elif atom.kind is AtomKind.LOG_SHIFT:
        k = kappa(atom.s, spec)
        d = (lam / (lam - k) - 1.0) / p
    else:
        d = -lam * _diag_log2(spec, aux)
    return GradientDiag(d, atom, Mode.INVERSE)


def delta_and_diag(spec, metric, aux=None):
    """Estimate and combined gradient diagonal for a whole metric.

    Returns
    -------
    delta_hat : float
    diag : ndarray, shape (p,)
        ``sum_j w_j d_j`` over the metric's atoms.
    spec : EmpiricalSpectrum
        The spectrum actually used (jittered if it was degenerate).
    """
    if aux is None:
        spec, aux = prepare(spec)
    gfun = grad_diag if spec.mode is Mode.DIRECT else grad_diag_inv
    delta = float(metric.constant)
    diag = np.zeros(spec.p)
    for w, atom in metric.terms:
        delta += w * atom_estimate(atom, spec, aux)
        diag += w * gfun(atom, spec, aux).diag
    return delta, diag, spec


def gradient_from_eig(eig, C_hat, M, diag, mode):
    """Assemble ``grad delta_hat`` from an eigenbasis and kernel diagonal."""
    V = eig.vectors
    Vinv = eig.inverse_vectors()
    if mode is Mode.DIRECT:
        return sym(C_hat @ (V * diag) @ Vinv)
    return sym((V * diag) @ Vinv @ M)


def objective_and_gradient(M, C_hat, n, metric, mode=Mode.DIRECT):
    """Return ``(delta_hat, grad h)`` with ``h = delta_hat^2``."""
    M = sym(M)
    C_hat = sym(C_hat)
    es, eig = spectrum_of(M, C_hat, n, mode)
    delta, diag, used = delta_and_diag(es, metric)
    # eig.values are ascending, matching the sorted spectrum order.
    G = gradient_from_eig(eig, C_hat, M, diag, mode)
    return delta, 2.0 * delta * G


def assemble_gradient(M, C_hat, n, spec_metric, mode=Mode.DIRECT):
    """Riemannian gradient of ``h = delta_hat^2`` at ``M``.

    The metric is ``<A, B>_M = tr(M^{-1} A M^{-1} B)``. Constants contribute
    to ``delta_hat`` (hence to the scale ``2 delta_hat``) but not to the
    kernel diagonal.
    """
    return objective_and_gradient(M, C_hat, n, spec_metric, mode)[1]


# ---------------------------------------------------------------------------
# Marchenko-Pastur reference
# ---------------------------------------------------------------------------

def mp_scm_theory(spec_metric, c, reciprocal=False):
    """Limit of ``delta(C, C_hat)`` under the Marchenko-Pastur law of ratio ``c``.

    Integrates ``f`` against the density ``sqrt((b - x)(x - a)) / (2 pi c x)``
    on ``[(1 - sqrt c)^2, (1 + sqrt c)^2]``. The substitution
    ``x = a + (b - a)(1 - cos u)/2`` removes the square-root endpoints.
    With ``reciprocal`` the integrand is ``f(1/x)``, the limit of
    ``delta(C_hat, C)``; the two agree for the Fisher distance.
    """
    c = float(c)
    if not 0.0 < c < 1.0:
        raise DomainError(f"ratio must lie in (0, 1), got {c}")
    a = (1.0 - np.sqrt(c)) ** 2
    b = (1.0 + np.sqrt(c)) ** 2
    half = 0.5 * (b - a)

    def integrand(u):
        x = a + half * (1.0 - np.cos(u))
        dens = (half * np.sin(u)) ** 2 / (2.0 * np.pi * c * x)
        arg = 1.0 / x if reciprocal else x
        return float(eval_f(spec_metric, arg)) * dens

    val, _ = scipy.integrate.quad(integrand, 0.0, np.pi, epsabs=1e-12, epsrel=1e-11,
                                  limit=400)
    # eval_f already includes the constant and the density has unit mass.
    return float(val)
