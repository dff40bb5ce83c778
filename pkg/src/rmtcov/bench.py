"""Monte Carlo benchmarks over grids of sample-size ratios.

Every random draw comes from a stream derived from ``(seed, ratio index,
trial)`` so results do not depend on execution order or worker count.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import __version__
from .datagen import (LDA_SHIFT, QDA_SHIFT, make_covariance, make_mixture,
                      parse_model, rng_for, sample, sample_mixture)
from .descent import (Backtracking, DescentConfig, Fixed, Identity,
                      LinearShrinkage, Retraction, Target, estimate,
                      linear_shrinkage_init)
from .discriminant import evaluate, fit_lda, fit_qda, parse_plugin
from .errors import ConfigError
from .matrix_io import format_table, read_table
from .metrics import parse_metric, true_delta
from .rmt import mp_scm_theory
from .spd import eig_sym

#: Ratio grid of the distance benchmarks, ``n/p``.
DISTANCE_RATIOS = (1.052632, 1.226316, 1.4, 1.578947, 1.752632, 1.926316, 2.105263,
                   2.278947, 2.452632, 2.631579)
#: Ratio grid of the classification benchmarks, ``(n1 + n2)/p``.
CLASSIFY_RATIOS = (2.068966, 2.238806, 2.429150, 2.654867, 2.926829, 3.260870,
                   3.680982, 4.225352, 4.958678, 6.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a benchmark run.

    ``kind`` is one of ``distance-sweep``, ``precision-sweep``, ``trace``,
    ``lda-sweep`` or ``qda-sweep``.
    """

    kind: str = "distance-sweep"
    model: str = "discrete:.1,1,3,4"
    model2: Optional[str] = None
    p: int = 200
    ratios: Tuple[float, ...] = DISTANCE_RATIOS
    metric: str = "fisher"
    trials: int = 100
    seed: int = 0
    estimators: Tuple[str, ...] = ("scm", "shrinkage", "proposed")
    init: str = "shrinkage"
    step: str = "backtrack"
    retraction: str = "exact"
    max_iters: int = 200
    redraw_model: bool = False
    test_size: int = 2000
    shift: Optional[float] = None
    workers: int = 1
    baseline: Optional[str] = None

    def __post_init__(self):
        kinds = ("distance-sweep", "precision-sweep", "trace", "lda-sweep", "qda-sweep")
        if self.kind not in kinds:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.p < 1:
            raise ConfigError("p must be positive")
        if not self.ratios:
            raise ConfigError("ratio grid is empty")
        if any(r <= 1 for r in self.ratios):
            raise ConfigError("every ratio must exceed 1")
        parse_metric(self.metric)
        parse_init(self.init)
        parse_step(self.step)
        parse_retraction(self.retraction)


def parse_init(text):
    """``identity``, ``shrinkage``, ``shrinkage:<alpha>`` or ``file:<path>``."""
    key = str(text).strip()
    head, _, tail = key.partition(":")
    head = head.lower()
    if head == "identity" and not tail:
        return Identity()
    if head == "shrinkage":
        if tail in ("", "auto"):
            return LinearShrinkage("auto")
        try:
            return LinearShrinkage(float(tail))
        except ValueError as exc:
            raise ConfigError(f"bad shrinkage intensity {tail!r}") from exc
    if head == "file" and tail:
        return ("file", tail)
    raise ConfigError(f"unknown init {text!r}")


def parse_step(text):
    """``backtrack``, ``adaptive`` or ``fixed:<t>``.

    ``adaptive`` is backtracking that may grow the step above ``t0`` and
    starts each search from the previously accepted step.
    """
    if isinstance(text, (Backtracking, Fixed)):
        return text
    key = str(text).strip().lower()
    if key in ("backtrack", "backtracking"):
        return Backtracking()
    if key == "adaptive":
        return Backtracking(max_expansions=30, warm_start=True)
    head, _, tail = key.partition(":")
    if head == "fixed":
        try:
            return Fixed(float(tail))
        except ValueError as exc:
            raise ConfigError(f"bad fixed step {tail!r}") from exc
    raise ConfigError(f"unknown step policy {text!r}")


def parse_retraction(text):
    try:
        return Retraction(str(text).strip().lower())
    except ValueError as exc:
        raise ConfigError(f"unknown retraction {text!r}") from exc


def descent_config(cfg, target, init=None):
    init = parse_init(cfg.init) if init is None else init
    if isinstance(init, tuple):
        raise ConfigError("file initialization is only available for single estimates")
    return DescentConfig(metric=parse_metric(cfg.metric), target=target, init=init,
                         step=parse_step(cfg.step),
                         retraction=parse_retraction(cfg.retraction),
                         max_iters=cfg.max_iters)


def sample_size(ratio, p):
    """``floor(ratio * p)``, the number of samples for a grid point."""
    return int(math.floor(ratio * p + 1e-9))


@dataclass
class ResultTable:
    """Aggregated benchmark rows with a metadata header."""

    columns: Tuple[str, ...]
    rows: list
    metadata: dict = field(default_factory=dict)

    def to_csv(self):
        return format_table(list(self.columns), self.rows, self.metadata)

    def select(self, estimator):
        return [r for r in self.rows if r["estimator"] == estimator]

    def means(self, estimator):
        return np.array([float(r["mean"]) for r in self.select(estimator)])


def _summary(values):
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _metadata(cfg):
    meta = asdict(cfg)
    meta["version"] = __version__
    return meta


def _inverse(S):
    return eig_sym(S).reconstruct(lambda w: 1.0 / w)


# ---------------------------------------------------------------------------
# Distance sweeps
# ---------------------------------------------------------------------------

def _population(cfg, ratio_idx=0, trial=0):
    seed = cfg.seed
    if cfg.redraw_model:
        seed = int(rng_for(cfg.seed, 1000 + ratio_idx, trial).integers(2 ** 31))
    return make_covariance(parse_model(cfg.model, cfg.p, seed))


def _distance_trial(args):
    cfg, ratio_idx, trial, C = args
    if C is None:
        C = _population(cfg, ratio_idx, trial)
    p = cfg.p
    n = sample_size(cfg.ratios[ratio_idx], p)
    X = sample(C, n, (cfg.seed, ratio_idx, trial))
    C_hat = X @ X.T / n
    C_hat = 0.5 * (C_hat + C_hat.T)
    metric = parse_metric(cfg.metric)
    target = Target.PRECISION if cfg.kind == "precision-sweep" else Target.COVARIANCE
    ref = _inverse(C) if target is Target.PRECISION else C
    out = {}
    for name in cfg.estimators:
        key = name.split(":")[0]
        if key == "scm":
            est = C_hat if target is Target.COVARIANCE else _inverse(C_hat)
        elif key == "shrinkage":
            init = parse_init(name)
            S = linear_shrinkage_init(C_hat, n, init.alpha, X)
            est = S if target is Target.COVARIANCE else _inverse(S)
        elif key == "proposed":
            dc = descent_config(cfg, target)
            if ":" in name:
                dc = replace(dc, metric=parse_metric(name.split(":", 1)[1]))
            est, _ = estimate(X, dc)
        else:
            raise ConfigError(f"unknown estimator {name!r}")
        out[name] = true_delta(est, ref, metric)
    return ratio_idx, trial, out


def _run_pool(func, jobs, workers):
    if workers <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=1))


def run_distance_sweep(cfg):
    """Mean true divergence of each estimator per ratio.

    Rows carry ``ratio, n, estimator, mean, std, trials``. An ``scm-th`` row
    gives the Marchenko-Pastur limit of the SCM divergence at ``c = p/n``.
    """
    if cfg.kind not in ("distance-sweep", "precision-sweep"):
        raise ConfigError(f"not a distance sweep: {cfg.kind}")
    C_fixed = None if cfg.redraw_model else _population(cfg)
    jobs = [(cfg, i, t, C_fixed) for i in range(len(cfg.ratios)) for t in range(cfg.trials)]
    results = _run_pool(_distance_trial, jobs, cfg.workers)
    results.sort(key=lambda r: (r[0], r[1]))
    metric = parse_metric(cfg.metric)
    rows = []
    for i, ratio in enumerate(cfg.ratios):
        n = sample_size(ratio, cfg.p)
        per = [r[2] for r in results if r[0] == i]
        for name in cfg.estimators:
            mean, std = _summary([d[name] for d in per])
            rows.append(dict(ratio=ratio, n=n, estimator=name, mean=mean, std=std,
                             trials=cfg.trials))
        th = mp_scm_theory(metric, cfg.p / n, reciprocal=cfg.kind == "distance-sweep")
        rows.append(dict(ratio=ratio, n=n, estimator="scm-th", mean=th, std=0.0, trials=0))
    table = ResultTable(("ratio", "n", "estimator", "mean", "std", "trials"), rows,
                        _metadata(cfg))
    if cfg.baseline:
        merge_baseline(table, cfg.baseline)
    return table


def merge_baseline(table, path):
    """Append externally computed columns from a wide CSV keyed by ``ratio``.

    Every non-``ratio`` column becomes rows with estimator ``baseline:<name>``.
    """
    _, rows = read_table(path)
    if not rows or "ratio" not in rows[0]:
        raise ConfigError(f"baseline {path} needs a 'ratio' column")
    n_by_ratio = {float(r["ratio"]): r.get("n", "") for r in table.rows}
    for row in rows:
        ratio = float(row["ratio"])
        n = next((v for k, v in n_by_ratio.items() if math.isclose(k, ratio, rel_tol=1e-6)), "")
        for name, value in row.items():
            if name in ("ratio", "n"):
                continue
            table.rows.append(dict(ratio=ratio, n=n, estimator=f"baseline:{name}",
                                   mean=float(value), std=float("nan"), trials=""))
    table.metadata["baseline"] = str(path)
    return table


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------

def run_trace(cfg, ratio=None, objective_floor=1e-24, max_iters=5000):
    """One descent from the identity, recording true and estimated divergences.

    Returns the :class:`DescentTrace` with a ``gap`` column available through
    :func:`trace_table`.
    """
    ratio = cfg.ratios[0] if ratio is None else ratio
    C = _population(cfg)
    n = sample_size(ratio, cfg.p)
    X = sample(C, n, (cfg.seed, 0, 0))
    target = Target.PRECISION if cfg.kind == "precision-sweep" else Target.COVARIANCE
    dc = replace(descent_config(cfg, target, Identity()), max_iters=max_iters,
                 objective_floor=objective_floor, grad_tol=0.0)
    _, trace = estimate(X, dc, C_true=C)
    return trace


def trace_table(trace, cfg):
    cols = ("k", "h", "delta_hat", "step", "grad_norm", "true_delta", "gap")
    rows = []
    for r in trace.records:
        rows.append(dict(k=r.k, h=r.h, delta_hat=r.delta_hat, step=r.step,
                         grad_norm=r.grad_norm, true_delta=r.true_delta,
                         gap=r.true_delta - r.delta_hat))
    meta = _metadata(cfg)
    meta["stop_reason"] = trace.stop_reason
    return ResultTable(cols, rows, meta)


# ---------------------------------------------------------------------------
# Classification sweeps
# ---------------------------------------------------------------------------

def _class_models(cfg, ratio_idx=0, trial=0):
    m2 = cfg.model2 if cfg.model2 is not None else cfg.model
    base = cfg.seed
    if cfg.redraw_model:
        base = int(rng_for(cfg.seed, 1000 + ratio_idx, trial).integers(2 ** 31))
    s1 = int(rng_for(base, 1).integers(2 ** 31))
    s2 = int(rng_for(base, 2).integers(2 ** 31))
    return parse_model(cfg.model, cfg.p, s1), parse_model(m2, cfg.p, s2)


def _classify_trial(args):
    cfg, ratio_idx, trial = args
    lda = cfg.kind == "lda-sweep"
    shift = cfg.shift if cfg.shift is not None else (LDA_SHIFT if lda else QDA_SHIFT)
    m1, m2 = _class_models(cfg, ratio_idx, trial)
    n_a = int(round(cfg.ratios[ratio_idx] * cfg.p / 2))
    mix = make_mixture(m1, m2, n_a, n_a, shift)
    X1, X2 = sample_mixture(mix, (cfg.seed, ratio_idx, trial, 0))
    T1, T2 = sample_mixture(mix, (cfg.seed, ratio_idx, trial, 1), cfg.test_size, cfg.test_size)
    X_test = np.hstack([T1, T2])
    labels = np.concatenate([np.ones(cfg.test_size, int), np.full(cfg.test_size, 2)])
    fit = fit_lda if lda else fit_qda
    out = {}
    for name in cfg.estimators:
        plugin = parse_plugin(name)
        out[name] = evaluate(fit(X1, X2, plugin), X_test, labels)
    return ratio_idx, trial, out


def run_classify_sweep(cfg):
    """Mean LDA or QDA test accuracy per estimator and ratio ``(n1 + n2)/p``."""
    if cfg.kind not in ("lda-sweep", "qda-sweep"):
        raise ConfigError(f"not a classification sweep: {cfg.kind}")
    jobs = [(cfg, i, t) for i in range(len(cfg.ratios)) for t in range(cfg.trials)]
    results = _run_pool(_classify_trial, jobs, cfg.workers)
    results.sort(key=lambda r: (r[0], r[1]))
    rows = []
    for i, ratio in enumerate(cfg.ratios):
        per = [r[2] for r in results if r[0] == i]
        n_a = int(round(ratio * cfg.p / 2))
        for name in cfg.estimators:
            mean, std = _summary([d[name] for d in per])
            rows.append(dict(ratio=ratio, n=2 * n_a, estimator=name, mean=mean, std=std,
                             trials=cfg.trials))
    table = ResultTable(("ratio", "n", "estimator", "mean", "std", "trials"), rows,
                        _metadata(cfg))
    if cfg.baseline:
        merge_baseline(table, cfg.baseline)
    return table
