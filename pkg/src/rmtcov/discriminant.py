"""Two-class LDA and QDA with pluggable covariance or precision estimators."""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .descent import (DescentConfig, Target, estimate, linear_shrinkage_init,
                      sample_covariance)
from .errors import ConfigError, RegimeError
from .metrics import parse_metric
from .spd import eig_sym, sym


@dataclass(frozen=True)
class EstimatorPlugin:
    """Named map ``(X, target) -> SPD`` where ``X`` is ``p x n`` raw samples.

    Samples are centered by the plugin; ``target`` selects whether the
    covariance or its inverse is returned.
    """

    name: str
    procedure: Callable[[np.ndarray, Target], np.ndarray]

    def __call__(self, X, target=Target.COVARIANCE):
        out = sym(self.procedure(np.asarray(X, dtype=float), target))
        p = X.shape[0]
        if out.shape != (p, p):
            raise ConfigError(f"plugin {self.name} returned shape {out.shape}")
        return out


def _inverse(S):
    e = eig_sym(S)
    if e.values[0] <= 0:
        raise RegimeError("covariance estimate is singular")
    return e.reconstruct(lambda w: 1.0 / w)


def _scm(X, target):
    S, _ = sample_covariance(X, center=True)
    return S if target is Target.COVARIANCE else _inverse(S)


def scm_plugin():
    """Centered sample covariance with ``n - 1`` normalization."""
    return EstimatorPlugin("scm", _scm)


def shrinkage_plugin(alpha="auto"):
    """Linear shrinkage ``alpha I + sqrt(1 - alpha^2) C_hat``."""

    def proc(X, target):
        S, n_eff = sample_covariance(X, center=True)
        Xc = X - X.mean(axis=1, keepdims=True)
        M = linear_shrinkage_init(S, n_eff, alpha, Xc)
        return M if target is Target.COVARIANCE else _inverse(M)

    label = "auto" if alpha == "auto" else f"{float(alpha):g}"
    return EstimatorPlugin(f"shrinkage:{label}", proc)


def proposed_plugin(metric="fisher", **config_kw):
    """Descent estimator minimizing the estimated ``metric`` divergence."""
    spec = parse_metric(metric) if isinstance(metric, str) else metric

    def proc(X, target):
        cfg = DescentConfig(metric=spec, target=target, **config_kw)
        M, _ = estimate(X, cfg, center=True)
        return M

    return EstimatorPlugin(f"proposed:{spec.name}", proc)


def parse_plugin(text):
    """Build a plugin from ``scm``, ``shrinkage:<alpha|auto>`` or ``proposed:<metric>``."""
    key = str(text).strip().lower()
    head, _, tail = key.partition(":")
    if head == "scm" and not tail:
        return scm_plugin()
    if head == "shrinkage":
        if tail in ("", "auto"):
            return shrinkage_plugin("auto")
        try:
            return shrinkage_plugin(float(tail))
        except ValueError as exc:
            raise ConfigError(f"bad shrinkage intensity in {text!r}") from exc
    if head == "proposed":
        return proposed_plugin(tail or "fisher")
    raise ConfigError(f"unknown estimator {text!r}")


@dataclass
class FittedLDA:
    mu1: np.ndarray
    mu2: np.ndarray
    precision: np.ndarray


@dataclass
class FittedQDA:
    mu1: np.ndarray
    mu2: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    logdet1: float
    logdet2: float
    log_prior_ratio: float


def _check_classes(X1, X2):
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    if X1.ndim != 2 or X2.ndim != 2 or X1.shape[0] != X2.shape[0]:
        raise ConfigError("class samples must be p x n_a with a common p")
    return X1, X2


def fit_lda(X1, X2, plugin):
    """Fit LDA from class samples (columns) with pooled plugin covariances."""
    X1, X2 = _check_classes(X1, X2)
    p = X1.shape[0]
    n1, n2 = X1.shape[1], X2.shape[1]
    if not n1 + n2 > p:
        raise RegimeError(f"need n1 + n2 > p, got {n1 + n2} <= {p}")
    C1 = plugin(X1, Target.COVARIANCE)
    C2 = plugin(X2, Target.COVARIANCE)
    pooled = (n1 * C1 + n2 * C2) / (n1 + n2)
    return FittedLDA(X1.mean(axis=1), X2.mean(axis=1), _inverse(pooled))


def score_lda(model, x):
    """LDA statistic; positive values vote for class 1.

    ``x`` may be a single vector or a ``p x m`` matrix of column vectors.
    """
    P = model.precision
    w = P @ (model.mu1 - model.mu2)
    b = 0.5 * model.mu2 @ P @ model.mu2 - 0.5 * model.mu1 @ P @ model.mu1
    return w @ np.asarray(x, dtype=float) + b


def _logdet_spd(P):
    e = eig_sym(P)
    if e.values[0] <= 0:
        raise RegimeError("precision estimate is not positive definite")
    return float(np.sum(np.log(e.values)))


def fit_qda(X1, X2, plugin):
    """Fit QDA with per-class precision estimates from ``plugin``."""
    X1, X2 = _check_classes(X1, X2)
    p = X1.shape[0]
    n1, n2 = X1.shape[1], X2.shape[1]
    if not (n1 > p and n2 > p):
        raise RegimeError(f"each class needs more than p={p} samples, got {n1}, {n2}")
    P1 = plugin(X1, Target.PRECISION)
    P2 = plugin(X2, Target.PRECISION)
    return FittedQDA(X1.mean(axis=1), X2.mean(axis=1), P1, P2, _logdet_spd(P1),
                     _logdet_spd(P2), float(np.log(n2 / n1)))


def score_qda(model, x):
    """QDA statistic; positive values vote for class 1."""
    x = np.asarray(x, dtype=float)
    P1, P2, m1, m2 = model.P1, model.P2, model.mu1, model.mu2
    D = P2 - P1
    lin = P1 @ m1 - P2 @ m2
    const = (0.5 * m2 @ P2 @ m2 - 0.5 * m1 @ P1 @ m1
             + 0.5 * (model.logdet1 - model.logdet2) - model.log_prior_ratio)
    if x.ndim == 1:
        quad = x @ D @ x
    else:
        quad = np.einsum("im,ij,jm->m", x, D, x)
    return 0.5 * quad + lin @ x + const


def classify(scores):
    """Class labels from scores: 1 when strictly positive, else 2 (ties to 2)."""
    return np.where(np.asarray(scores) > 0, 1, 2)


def evaluate(model, X_test, labels):
    """Accuracy on columns of ``X_test`` with labels in {1, 2}."""
    labels = np.asarray(labels)
    if isinstance(model, FittedLDA):
        s = score_lda(model, X_test)
    elif isinstance(model, FittedQDA):
        s = score_qda(model, X_test)
    else:
        raise ConfigError(f"unsupported model {type(model).__name__}")
    return float(np.mean(classify(s) == labels))
