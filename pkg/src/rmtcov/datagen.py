"""Synthetic covariance models, Gaussian samples and two-class mixtures."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import ortho_group

from .errors import ConfigError
from .spd import check_spd, sqrtm_spd


def rng_for(seed, *keys):
    """Independent generator derived from ``seed`` and integer ``keys``."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise ConfigError("cannot derive streams from a Generator")
        return seed
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class CovarianceModel:
    """Population covariance family.

    Attributes
    ----------
    kind : {"wishart", "toeplitz", "discrete"}
    p : int
    a : float
        Toeplitz correlation, in (0, 1).
    eigenvalues : tuple of float
        Distinct eigenvalues of the discrete model, each with multiplicity
        ``p / len(eigenvalues)``.
    seed : int
        Seeds the random parts (Wishart draw, Haar eigenbasis).
    wishart_scale : str
        ``"unit"`` divides the Wishart draw by its ``2p`` degrees of freedom so
        that its expectation is the identity; ``"raw"`` keeps ``Z Z^T``.
    """

    kind: str
    p: int
    a: Optional[float] = None
    eigenvalues: Tuple[float, ...] = ()
    seed: int = 0
    wishart_scale: str = "unit"

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"dimension must be positive, got {self.p}")
        if self.kind == "toeplitz":
            if self.a is None or not 0.0 < self.a < 1.0:
                raise ConfigError(f"toeplitz parameter must lie in (0, 1), got {self.a}")
        elif self.kind == "discrete":
            ev = self.eigenvalues
            if not ev or any(v <= 0 for v in ev):
                raise ConfigError("discrete model needs positive eigenvalues")
            if self.p % len(ev):
                raise ConfigError(
                    f"p={self.p} not divisible by {len(ev)} distinct eigenvalues")
        elif self.kind == "wishart":
            if self.wishart_scale not in ("unit", "raw"):
                raise ConfigError(f"unknown wishart scale {self.wishart_scale!r}")
        else:
            raise ConfigError(f"unknown covariance model {self.kind!r}")

    @property
    def label(self):
        if self.kind == "toeplitz":
            return f"toeplitz:{self.a:g}"
        if self.kind == "discrete":
            return "discrete:" + ",".join(f"{v:g}" for v in self.eigenvalues)
        return "wishart"


def parse_model(text, p, seed=0):
    """Parse ``wishart``, ``toeplitz:<a>`` or ``discrete:<v1,v2,...>``."""
    key = str(text).strip().lower()
    head, _, tail = key.partition(":")
    try:
        if head == "wishart" and not tail:
            return CovarianceModel("wishart", p, seed=seed)
        if head == "toeplitz":
            return CovarianceModel("toeplitz", p, a=float(tail), seed=seed)
        if head == "discrete":
            vals = tuple(float(v) for v in tail.split(",") if v.strip())
            return CovarianceModel("discrete", p, eigenvalues=vals, seed=seed)
    except ValueError as exc:
        raise ConfigError(f"bad model string {text!r}: {exc}") from exc
    raise ConfigError(f"unknown model string {text!r}")


def haar_orthogonal(p, rng):
    """Haar-distributed ``p x p`` orthogonal matrix."""
    if p == 1:
        return np.ones((1, 1))
    return ortho_group.rvs(dim=p, random_state=rng)


def toeplitz_covariance(p, a):
    idx = np.arange(p)
    return a ** np.abs(idx[:, None] - idx[None, :])


def make_covariance(model):
    """Population covariance drawn from ``model`` (deterministic in its seed)."""
    p = model.p
    rng = rng_for(model.seed)
    if model.kind == "toeplitz":
        return toeplitz_covariance(p, model.a)
    if model.kind == "discrete":
        ev = np.repeat(np.asarray(model.eigenvalues, dtype=float), p // len(model.eigenvalues))
        Q = haar_orthogonal(p, rng)
        C = (Q * ev) @ Q.T
        return 0.5 * (C + C.T)
    Z = rng.standard_normal((p, 2 * p))
    C = Z @ Z.T
    if model.wishart_scale == "unit":
        C /= 2 * p
    return 0.5 * (C + C.T)


def sample(C, n, seed, law="gaussian"):
    """Draw ``n`` columns ``C^{1/2} z`` with i.i.d. zero-mean unit-variance ``z``.

    Parameters
    ----------
    C : ndarray, shape (p, p)
        SPD covariance.
    n : int
    seed : int, sequence of int, or numpy Generator
    law : {"gaussian", "rademacher"}
    """
    C = check_spd(C, "C")
    if n < 1:
        raise ConfigError("n must be at least 1")
    if isinstance(seed, (tuple, list)):
        rng = rng_for(*seed)
    else:
        rng = rng_for(seed)
    p = C.shape[0]
    if law == "gaussian":
        Z = rng.standard_normal((p, n))
    elif law == "rademacher":
        Z = rng.choice(np.array([-1.0, 1.0]), size=(p, n))
    else:
        raise ConfigError(f"unknown sampling law {law!r}")
    return sqrtm_spd(C) @ Z


@dataclass
class MixtureModel:
    """Two Gaussian classes ``N(mu_a, C_a)`` with ``n_a`` training samples each."""

    mu1: np.ndarray
    C1: np.ndarray
    mu2: np.ndarray
    C2: np.ndarray
    n1: int
    n2: int

    def __post_init__(self):
        p = self.mu1.shape[0]
        for M in (self.C1, self.C2):
            if M.shape != (p, p):
                raise ConfigError("mixture dimensions disagree")
        if self.mu2.shape != (p,):
            raise ConfigError("mixture dimensions disagree")

    @property
    def p(self):
        return self.mu1.shape[0]


#: Mean shifts ``mu_2 - mu_1`` are ``shift / p`` along the chosen direction.
LDA_SHIFT = 80.0
QDA_SHIFT = 1.0


def make_mixture(model1, model2, n1, n2, shift, direction="ones"):
    """Two-class mixture with ``mu_1 = 0`` and ``mu_2 = (shift/p) u``.

    ``u`` is the all-ones vector (``direction="ones"``) or the first
    canonical vector (``direction="e1"``).
    """
    if model1.p != model2.p:
        raise ConfigError("class models must share the dimension")
    p = model1.p
    if direction == "ones":
        u = np.ones(p)
    elif direction == "e1":
        u = np.zeros(p)
        u[0] = 1.0
    else:
        raise ConfigError(f"unknown shift direction {direction!r}")
    mu1 = np.zeros(p)
    return MixtureModel(mu1, make_covariance(model1), mu1 + shift / p * u,
                        make_covariance(model2), int(n1), int(n2))


def sample_mixture(mix, seed, n1=None, n2=None):
    """Return ``(X1, X2)``, each ``p x n_a``, from independent streams."""
    n1 = mix.n1 if n1 is None else n1
    n2 = mix.n2 if n2 is None else n2
    key = seed if isinstance(seed, (tuple, list)) else (seed,)
    X1 = sample(mix.C1, n1, tuple(key) + (1,)) + mix.mu1[:, None]
    X2 = sample(mix.C2, n2, tuple(key) + (2,)) + mix.mu2[:, None]
    return X1, X2
