"""Covariance and precision estimation by minimizing random-matrix estimates
of spectral divergences on the SPD manifold."""

__version__ = "0.1.0"

from .errors import (ConfigError, DataIOError, NumericalError, RegimeError,
                     RmtcovError)
from .metrics import (Atom, AtomKind, MetricSpec, bhattacharyya, fisher,
                      kullback_leibler, parse_metric, renyi, true_delta)
from .rmt import (Mode, assemble_gradient, estimate_delta, estimate_delta_inv,
                  mp_scm_theory)
from .descent import DescentConfig, Target, estimate

__all__ = [
    "Atom", "AtomKind", "ConfigError", "DataIOError", "DescentConfig", "MetricSpec",
    "Mode", "NumericalError", "RegimeError", "RmtcovError", "Target",
    "assemble_gradient", "bhattacharyya", "estimate", "estimate_delta",
    "estimate_delta_inv", "fisher", "kullback_leibler", "mp_scm_theory",
    "parse_metric", "renyi", "true_delta",
]
