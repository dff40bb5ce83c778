"""Spectral divergences written as weighted sums of atomic functions.

Every supported divergence between SPD matrices ``M`` and ``C`` has the form
``(1/p) sum_i f(lambda_i(M^{-1} C))`` with ``f`` a linear combination of four
atoms plus a constant:

============  ==================  ===========================  ====================
atom          f(t)                G(z), G'(z) = f(1/z)         F(z), F'(z) = f(z)
============  ==================  ===========================  ====================
Linear        t                   log z                        z^2 / 2
Log           log t               -z log z + z                 z log z - z
LogShift(s)   log(1 + s t)        s log(s+z) + z log((s+z)/z)  (1/s + z) log(1+sz) - z
LogSquared    log^2 t             z (log^2 z - 2 log z + 2)    same as G
============  ==================  ===========================  ====================

The complex logarithms in ``G`` and ``F`` use the principal branch shifted
by ``2 pi i`` times caller-supplied winding numbers, so that a contour
integrator can keep them continuous.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, DomainError
from .spd import check_spd

TWO_PI_I = 2j * np.pi


class AtomKind(Enum):
    LINEAR = "linear"
    LOG = "log"
    LOG_SHIFT = "logshift"
    LOG_SQUARED = "log2"


@dataclass(frozen=True)
class Atom:
    """One atomic function ``f``.

    Attributes
    ----------
    kind : AtomKind
    s : float or None
        Shift parameter, required and positive for ``LOG_SHIFT`` only.
    """

    kind: AtomKind
    s: float = None

    def __post_init__(self):
        if self.kind is AtomKind.LOG_SHIFT:
            if self.s is None or not np.isfinite(self.s) or self.s <= 0:
                raise DomainError(f"LogShift needs s > 0, got {self.s}")
        elif self.s is not None:
            raise ConfigError(f"{self.kind.value} atom takes no parameter")

    def f(self, t):
        """Evaluate ``f`` at positive real arguments."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("atoms are defined for t > 0 only")
        if self.kind is AtomKind.LINEAR:
            return t
        if self.kind is AtomKind.LOG:
            return np.log(t)
        if self.kind is AtomKind.LOG_SHIFT:
            return np.log1p(self.s * t)
        return np.log(t) ** 2

    def __str__(self):
        if self.kind is AtomKind.LOG_SHIFT:
            return f"logshift({self.s:g})"
        return self.kind.value


LINEAR = Atom(AtomKind.LINEAR)
LOG = Atom(AtomKind.LOG)
LOG_SQUARED = Atom(AtomKind.LOG_SQUARED)


def log_shift(s):
    """``Atom`` for ``f(t) = log(1 + s t)``."""
    return Atom(AtomKind.LOG_SHIFT, float(s))


@dataclass(frozen=True)
class MetricSpec:
    """Divergence ``sum_j w_j f_j(t) + constant``.

    Attributes
    ----------
    terms : tuple of (float, Atom)
    constant : float
    name : str
    """

    terms: Tuple[Tuple[float, Atom], ...]
    constant: float = 0.0
    name: str = field(default="custom")

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ConfigError("a metric needs at least one term")
        for w, atom in self.terms:
            if not np.isfinite(w):
                raise ConfigError(f"non-finite weight {w} in {self.name}")
            if not isinstance(atom, Atom):
                raise ConfigError(f"term atom must be an Atom, got {atom!r}")

    def eval_f(self, t):
        return eval_f(self, t)


def fisher():
    """Squared affine-invariant distance, ``f(t) = log^2 t``."""
    return MetricSpec(((1.0, LOG_SQUARED),), 0.0, "fisher")


def bhattacharyya():
    """Bhattacharyya distance between zero-mean Gaussians."""
    return MetricSpec(((-0.25, LOG), (0.5, log_shift(1.0))),
                      -0.5 * np.log(2.0), "bhattacharyya")


def kullback_leibler():
    """Kullback-Leibler divergence between zero-mean Gaussians."""
    return MetricSpec(((0.5, LINEAR), (-0.5, LOG)), -0.5, "kl")


def renyi(alpha):
    """Renyi divergence of order ``alpha`` in (0, 1)."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"renyi order must lie in (0, 1), got {alpha}")
    s = (1.0 - alpha) / alpha
    w = -1.0 / (2.0 * (alpha - 1.0))
    return MetricSpec(((w, log_shift(s)), (0.5, LOG)),
                      -np.log(alpha) / (2.0 * (alpha - 1.0)), f"renyi:{alpha:g}")


def parse_metric(text):
    """Build a metric from ``fisher``, ``bhattacharyya``, ``kl`` or ``renyi:<a>``."""
    key = str(text).strip().lower()
    table = {"fisher": fisher, "bhattacharyya": bhattacharyya,
             "kl": kullback_leibler}
    if key in table:
        return table[key]()
    if key.startswith("renyi:"):
        try:
            alpha = float(key.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad renyi order in {text!r}") from exc
        return renyi(alpha)
    raise ConfigError(f"unknown metric {text!r}")


def eval_f(spec, t):
    """Evaluate the full divergence integrand, constant included."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, float(spec.constant))
    for w, atom in spec.terms:
        out = out + w * atom.f(t)
    return out if out.ndim else float(out)


def _log(z, winding):
    return np.log(z) + TWO_PI_I * np.asarray(winding)


def eval_G(atom, z, winding=0, winding_shift=0):
    """Antiderivative of ``f(1/z)`` at complex ``z``.

    Parameters
    ----------
    atom : Atom
    z : complex or ndarray
    winding : int or ndarray
        Branch offset added to ``log z`` as ``2 pi i * winding``.
    winding_shift : int or ndarray
        Branch offset for ``log(s + z)`` (LogShift only).
    """
    z = np.asarray(z, dtype=complex)
    lz = _log(z, winding)
    if atom.kind is AtomKind.LINEAR:
        return lz
    if atom.kind is AtomKind.LOG:
        return -z * lz + z
    if atom.kind is AtomKind.LOG_SHIFT:
        s = atom.s
        lsz = _log(s + z, winding_shift)
        return s * lsz + z * (lsz - lz)
    return z * (lz * lz - 2.0 * lz + 2.0)


def eval_F(atom, z, winding=0, winding_shift=0):
    """Antiderivative of ``f(z)`` at complex ``z``.

    Branch offsets behave as in :func:`eval_G`; for LogShift the shifted
    logarithm is ``log(1 + s z)``.
    """
    z = np.asarray(z, dtype=complex)
    if atom.kind is AtomKind.LINEAR:
        return 0.5 * z * z
    lz = _log(z, winding)
    if atom.kind is AtomKind.LOG:
        return z * lz - z
    if atom.kind is AtomKind.LOG_SHIFT:
        s = atom.s
        l1 = _log(1.0 + s * z, winding_shift)
        return (1.0 / s + z) * l1 - z
    return z * (lz * lz - 2.0 * lz + 2.0)


def pencil_eigvals(M, C):
    """Eigenvalues of ``M^{-1} C`` for SPD ``M`` and ``C``."""
    M = check_spd(M, "M")
    C = check_spd(C, "C")
    if M.shape != C.shape:
        raise DimensionError(f"shape mismatch {M.shape} vs {C.shape}")
    return scipy.linalg.eigvalsh(C, M)


def true_delta(M, C, spec):
    """Population divergence ``(1/p) sum f(lambda_i(M^{-1} C))`` plus constant."""
    lam = pencil_eigvals(M, C)
    return float(np.mean(eval_f(spec, lam)))
