"""Command-line interface.

Settings resolve in three layers: per-command defaults, then an optional
INI-style ``--config`` file (``[common]`` plus a section named after the
subcommand), then explicit flags.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 input/output error.
"""
import argparse
import configparser
import sys

import numpy as np

from . import __version__
from .bench import (CLASSIFY_RATIOS, DISTANCE_RATIOS, ExperimentConfig,
                    parse_init, parse_retraction, parse_step, run_classify_sweep,
                    run_distance_sweep, run_trace, sample_size, trace_table)
from .datagen import make_covariance, parse_model, sample
from .descent import Custom, DescentConfig, Target, estimate
from .errors import ConfigError, DataIOError, RmtcovError
from .matrix_io import format_matrix, read_matrix, write_text
from .metrics import parse_metric

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _floats(text):
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _strings(text):
    if isinstance(text, (tuple, list)):
        return tuple(text)
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    key = str(text).strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


CONVERTERS = {
    "p": int, "n": int, "trials": int, "seed": int, "workers": int,
    "max_iters": int, "test_size": int, "ratios": _floats, "estimators": _strings,
    "shift": float, "redraw_model": _bool, "center": _bool,
}

DEFAULTS = {
    "estimate": dict(metric="fisher", mode="cov", init="shrinkage", step="backtrack",
                     retraction="exact", max_iters=200, center=False),
    "bench-distance": dict(metric="fisher", model="discrete:.1,1,3,4", p=200,
                           ratios=DISTANCE_RATIOS, trials=100, seed=0, init="shrinkage",
                           step="backtrack", retraction="exact", max_iters=200,
                           estimators=("scm", "shrinkage", "proposed"), workers=1,
                           redraw_model=False),
    "bench-classify": dict(kind="qda", metric="fisher", model="toeplitz:0.2",
                           model2="toeplitz:0.4", p=100, ratios=CLASSIFY_RATIOS,
                           trials=10, seed=0, estimators=("scm", "shrinkage:auto",
                                                          "proposed:fisher"),
                           test_size=2000, workers=1, redraw_model=False),
    "trace": dict(metric="fisher", mode="cov", model="discrete:.1,1,3,4", p=200,
                  ratios=(2.0,), seed=0, step="backtrack", retraction="exact",
                  max_iters=5000),
    "datagen": dict(model="discrete:.1,1,3,4", p=200, seed=0, law="gaussian"),
}
DEFAULTS["bench-precision"] = dict(DEFAULTS["bench-distance"])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rmtcov",
        description="Random-matrix improved covariance and precision estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [common] and per-command sections")
    common.add_argument("--metric", help="fisher, bhattacharyya, kl or renyi:<alpha>")
    common.add_argument("--mode", choices=("cov", "prec"))
    common.add_argument("--model", help="wishart, toeplitz:<a> or discrete:<v1,...>")
    common.add_argument("--model2", help="second class model (classification)")
    common.add_argument("--p", type=int)
    common.add_argument("--ratios", help="comma-separated sample ratios")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--init", help="identity, shrinkage[:alpha] or file:<path>")
    common.add_argument("--step", help="backtrack, adaptive or fixed:<t>")
    common.add_argument("--retraction", choices=("exact", "order2"))
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--baseline", help="wide CSV with external columns keyed by ratio")
    common.add_argument("--redraw-model", dest="redraw_model", action="store_const",
                        const=True, default=None,
                        help="draw a fresh population matrix per trial")
    common.add_argument("--workers", type=int)
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--estimators", help="comma-separated estimator names")
    common.add_argument("--test-size", dest="test_size", type=int)
    common.add_argument("--shift", type=float, help="mean shift numerator over p")

    sub = parser.add_subparsers(dest="command", required=True)
    p_est = sub.add_parser("estimate", parents=[common],
                           help="estimate C or its inverse from a p x n sample CSV")
    p_est.add_argument("input", help="CSV with one row per variable, one column per sample")
    p_est.add_argument("--trace", help="write the descent trace CSV here")
    p_est.add_argument("--center", action="store_const", const=True, default=None,
                       help="remove the sample mean (uses n - 1)")
    sub.add_parser("bench-distance", parents=[common],
                   help="divergence to C of SCM, shrinkage and the proposed estimate")
    sub.add_parser("bench-precision", parents=[common],
                   help="divergence to the inverse of C for precision estimates")
    p_cls = sub.add_parser("bench-classify", parents=[common], help="LDA or QDA accuracy sweep")
    p_cls.add_argument("--kind", choices=("lda", "qda"))
    sub.add_parser("trace", parents=[common],
                   help="per-iteration true and estimated divergence from the identity")
    p_gen = sub.add_parser("datagen", parents=[common], help="write synthetic samples")
    p_gen.add_argument("--n", type=int, help="sample count (default floor(ratio * p))")
    p_gen.add_argument("--cov-out", dest="cov_out", help="also write the population matrix")
    p_gen.add_argument("--law", choices=("gaussian", "rademacher"))
    return parser


def _read_config(path, command):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    values = {}
    for section in ("common", command):
        if cp.has_section(section):
            for key, val in cp.items(section):
                values[key.replace("-", "_")] = val
    return values


def resolve(args):
    """Merge defaults, config file and flags into one settings dict."""
    settings = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        settings.update(_read_config(args.config, args.command))
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        settings[key] = val
    for key, conv in CONVERTERS.items():
        if key in settings and settings[key] is not None:
            try:
                settings[key] = conv(settings[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {settings[key]!r}") from exc
    return settings


def _emit(text, out):
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _experiment(settings, kind):
    fields = {k: settings[k] for k in ExperimentConfig.__dataclass_fields__
              if k in settings and k != "kind"}
    return ExperimentConfig(kind=kind, **fields)


def cmd_estimate(settings):
    X = read_matrix(settings["input"])
    p, n = X.shape
    target = Target.PRECISION if settings.get("mode") == "prec" else Target.COVARIANCE
    init = parse_init(settings["init"])
    if isinstance(init, tuple):
        init = Custom(read_matrix(init[1]))
    cfg = DescentConfig(metric=parse_metric(settings["metric"]), target=target, init=init,
                        step=parse_step(settings["step"]),
                        retraction=parse_retraction(settings["retraction"]),
                        max_iters=settings["max_iters"])
    M, trace = estimate(X, cfg, center=settings.get("center", False))
    last = trace.records[-1]
    sys.stderr.write(f"iterations={last.k} stop={trace.stop_reason} "
                     f"delta_hat={last.delta_hat:.6g} grad_norm={last.grad_norm:.3g}\n")
    if settings.get("trace"):
        write_text(settings["trace"], trace.to_csv())
    _emit(format_matrix(M), settings.get("out"))
    return EXIT_OK


def cmd_bench_distance(settings, kind):
    table = run_distance_sweep(_experiment(settings, kind))
    _emit(table.to_csv(), settings.get("out"))
    return EXIT_OK


def cmd_bench_classify(settings):
    kind = "lda-sweep" if settings.get("kind", "qda") == "lda" else "qda-sweep"
    table = run_classify_sweep(_experiment(settings, kind))
    _emit(table.to_csv(), settings.get("out"))
    return EXIT_OK


def cmd_trace(settings):
    kind = "precision-sweep" if settings.get("mode") == "prec" else "distance-sweep"
    cfg = _experiment(settings, kind)
    trace = run_trace(cfg, max_iters=cfg.max_iters)
    _emit(trace_table(trace, cfg).to_csv(), settings.get("out"))
    return EXIT_OK


def cmd_datagen(settings):
    model = parse_model(settings["model"], settings["p"], settings["seed"])
    C = make_covariance(model)
    n = settings.get("n")
    if n is None:
        ratios = settings.get("ratios") or (2.0,)
        n = sample_size(ratios[0], settings["p"])
    X = sample(C, n, (settings["seed"], 1), law=settings.get("law", "gaussian"))
    if settings.get("cov_out"):
        write_text(settings["cov_out"], format_matrix(C))
    _emit(format_matrix(X), settings.get("out"))
    return EXIT_OK


def run(argv=None):
    args = build_parser().parse_args(argv)
    settings = resolve(args)
    cmd = args.command
    if cmd == "estimate":
        return cmd_estimate(settings)
    if cmd == "bench-distance":
        return cmd_bench_distance(settings, "distance-sweep")
    if cmd == "bench-precision":
        return cmd_bench_distance(settings, "precision-sweep")
    if cmd == "bench-classify":
        return cmd_bench_classify(settings)
    if cmd == "trace":
        return cmd_trace(settings)
    return cmd_datagen(settings)


def main(argv=None):
    try:
        return run(argv)
    except RmtcovError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except np.linalg.LinAlgError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
