"""Command line front end.

Subcommands: converge, moments, probe, laplace, path. Experiment settings come
from defaults, then an optional flat ``key=value`` config file, then flags.
"""

import argparse
import json
import math
import sys
import time

import numpy as np

from . import rng as rngmod
from .errors import ConfigurationError, ParameterError, TcsdeError
from .harness import ExperimentConfig, moment_boundedness_experiment, run_experiment
from .models import MODELS, get_model
from .output import RunManifest, error_report_csv, manifest_path, table_csv, write_text
from .probes import probe_all
from .solver import SCHEMES, TRUNCATED_EM, run_path
from .subordinator import SubordinatorSpec, sample_path_until, validate_laplace
from .time_change import build_grid, evaluate_E
from .truncation import TruncationPolicy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

DEFAULTS = {
    "model": "example1",
    "subordinator": "stable",
    "beta": 0.9,
    "theta": 1.0,
    "epsilon": 0.25,
    "pbar": 2.0,
    "delta_fine": 1e-5,
    "deltas": (1e-2, 1e-3, 1e-4),
    "paths": 100,
    "horizon": None,
    "seed": 42,
}

SUBORDINATORS = ("stable", "drift", "stable-drift")


class UsageError(TcsdeError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _float_list(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


_CONVERTERS = {
    "model": str,
    "subordinator": str,
    "beta": float,
    "theta": float,
    "epsilon": float,
    "pbar": float,
    "delta_fine": float,
    "deltas": _float_list,
    "paths": int,
    "horizon": lambda v: None if str(v).lower() in ("", "none") else float(v),
    "seed": int,
}


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise UsageError(f"{path}:{lineno}", "expected key=value")
            if key not in _CONVERTERS:
                raise UsageError(key, f"unknown config key in {path}")
            values[key] = value.strip()
    return values


def _convert(key, value):
    try:
        return _CONVERTERS[key](value)
    except (TypeError, ValueError):
        raise UsageError(key, f"cannot parse {value!r}") from None


def resolve_settings(cli_values, config_file=None):
    """Merge defaults < config file < explicit flags (flags left as None are unset)."""
    merged = dict(DEFAULTS)
    if config_file:
        for k, v in read_config_file(config_file).items():
            merged[k] = _convert(k, v)
    for k, v in cli_values.items():
        if v is not None:
            merged[k] = _convert(k, v) if isinstance(v, str) else v
    return merged


def subordinator_from(settings):
    kind = settings["subordinator"]
    try:
        if kind == "stable":
            return SubordinatorSpec.stable(settings["beta"])
        if kind == "drift":
            return SubordinatorSpec.drift_only(settings["theta"])
        if kind == "stable-drift":
            return SubordinatorSpec.stable_with_drift(settings["beta"], settings["theta"])
    except ParameterError as exc:
        key = "theta" if "theta" in str(exc) else "beta"
        raise UsageError(key, str(exc)) from None
    raise UsageError("subordinator", f"unknown kind {kind!r}; choose from {', '.join(SUBORDINATORS)}")


def config_from_settings(s):
    if s["model"] not in MODELS:
        raise UsageError("model", f"unknown model {s['model']!r}; choose from {', '.join(MODELS)}")
    eps = s["epsilon"]
    if not 0.0 < eps <= 0.25:
        raise UsageError("epsilon", f"{eps} is outside (0, 1/4]; kappa(delta) = delta^-epsilon "
                                    "needs epsilon in (0, 1/4]")
    deltas = tuple(s["deltas"])
    for d in deltas:
        k = round(d / s["delta_fine"])
        if k < 2 or abs(k * s["delta_fine"] - d) > 1e-9 * d:
            raise UsageError("deltas", f"{d!r} is not an integer multiple (>= 2) of "
                                       f"delta_fine={s['delta_fine']!r}")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise UsageError("deltas", "must be strictly decreasing")
    try:
        return ExperimentConfig(
            model=s["model"],
            subordinator=subordinator_from(s),
            epsilon=eps,
            pbar=s["pbar"],
            delta_fine=s["delta_fine"],
            deltas=deltas,
            n_paths=s["paths"],
            horizon=s["horizon"],
            seed=s["seed"],
        )
    except ParameterError as exc:
        raise UsageError("config", str(exc)) from None


def parse_config(args, config_file=None):
    """Build an ExperimentConfig from a list of CLI flags and an optional config file."""
    parser = argparse.ArgumentParser(prog="tcsde", add_help=False)
    _add_experiment_flags(parser)
    ns = parser.parse_args(args)
    cfg_file = config_file or ns.config
    return config_from_settings(resolve_settings(_experiment_values(ns), cfg_file))


def _add_experiment_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--model", choices=None, help=f"one of {', '.join(MODELS)}")
    p.add_argument("--subordinator", help="stable, drift or stable-drift")
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--pbar", type=float)
    p.add_argument("--delta-fine", dest="delta_fine", type=float)
    p.add_argument("--deltas", help="comma separated, decreasing")
    p.add_argument("--paths", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)


def _experiment_values(ns):
    return {k: getattr(ns, k, None) for k in _CONVERTERS}


def _finish(args, command, text, config, rows, started, extra=None):
    out = args.out
    write_text(text, sys.stdout if out in (None, "-") else out)
    if out not in (None, "-"):
        RunManifest(command=command, config=config, rows=rows,
                    wall_clock_seconds=time.perf_counter() - started,
                    extra=extra or {}).save(manifest_path(out))


def cmd_converge(args):
    started = time.perf_counter()
    config = config_from_settings(resolve_settings(_experiment_values(args), args.config))
    report = run_experiment(config, threads=args.threads)
    rows = [{"delta": r.delta, "mean_sup_error": r.mean_sup_error, "rms_error": r.rms_error,
             "std_error": r.std_error, "n_blowups": r.n_blowups} for r in report.records]
    reg = report.regression
    _finish(args, "converge", error_report_csv(report), config.as_dict(), rows, started,
            {"slope": reg.slope, "intercept": reg.intercept, "r_squared": reg.r_squared,
             "n_failures": report.n_failures,
             "sup_norm": "exact sup of step interpolants over fine grid points <= T",
             "error_statistic": "(E sup|Y - X_bar|^pbar)^(1/pbar)"})


def cmd_moments(args):
    started = time.perf_counter()
    config = config_from_settings(resolve_settings(_experiment_values(args), args.config))
    records = moment_boundedness_experiment(config, threads=args.threads)
    header = ("delta", "max_sup_state", "sup_moment", "plain_max_sup_state", "plain_blowups")
    rows = [(r.delta, r.max_sup_state, r.sup_moment, r.plain_max_sup_state, r.plain_blowups)
            for r in records]
    sups = [r.max_sup_state for r in records]
    text = table_csv(header, rows, [("max_min_ratio", repr(max(sups) / min(sups))),
                                    ("seed", config.seed)])
    _finish(args, "moments", text, config.as_dict(),
            [dict(zip(header, r)) for r in rows], started)


def cmd_probe(args):
    started = time.perf_counter()
    try:
        model = get_model(args.model)
    except ParameterError as exc:
        raise UsageError("model", str(exc)) from None
    reports = probe_all(model, n_probes=args.n_probes, ball_radius=args.radius,
                        p=args.p, q=args.q, seed=args.seed)
    payload = {
        "model": model.name,
        "alpha": model.alpha,
        "gamma_f": model.gamma_f,
        "gamma_g": model.gamma_g,
        "n_probes": args.n_probes,
        "ball_radius": args.radius,
        "seed": args.seed,
        "all_passed": all(r.passed for r in reports.values()),
        "assumptions": {k: r.to_dict() for k, r in reports.items()},
        "note": "probe estimates are lower bounds on sup-type constants; screening only",
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _finish(args, "probe", text, {"model": args.model, "n_probes": args.n_probes,
                                  "ball_radius": args.radius, "p": args.p, "q": args.q,
                                  "seed": args.seed}, [], started)


def laplace_table(betas, deltas, rs, n_samples, seed, retries=1):
    rows = []
    cell = 0
    for beta in betas:
        spec = SubordinatorSpec.stable(beta)
        for delta in deltas:
            for r in rs:
                for attempt in range(retries + 1):
                    res = validate_laplace(spec, delta, r, n_samples,
                                           rngmod.stream(seed, cell, attempt))
                    if res.passed():
                        break
                rows.append((beta, delta, r, n_samples, res.empirical, res.analytic,
                             res.std_error, res.z_score, res.passed(), attempt + 1))
                cell += 1
    return rows


LAPLACE_HEADER = ("beta", "delta", "r", "n_samples", "empirical", "analytic",
                  "std_error", "z_score", "passed", "attempts")


def cmd_laplace(args):
    started = time.perf_counter()
    try:
        betas, deltas, rs = _float_list(args.beta), _float_list(args.delta), _float_list(args.r)
    except ValueError as exc:
        raise UsageError("laplace", str(exc)) from None
    try:
        rows = laplace_table(betas, deltas, rs, args.samples, args.seed, args.retries)
    except ParameterError as exc:
        raise UsageError("laplace", str(exc)) from None
    text = table_csv(LAPLACE_HEADER, rows, [("seed", args.seed)])
    _finish(args, "laplace", text, {"beta": betas, "delta": deltas, "r": rs,
                                    "samples": args.samples, "seed": args.seed,
                                    "retries": args.retries},
            [dict(zip(LAPLACE_HEADER, r)) for r in rows], started)


def cmd_path(args):
    started = time.perf_counter()
    settings = resolve_settings(_experiment_values(args), args.config)
    config = config_from_settings(settings)
    model = get_model(config.model)
    policy = TruncationPolicy.for_model(model, config.epsilon)
    T = config.resolved_horizon(model)
    delta = args.delta
    sub_rng, bm_rng = rngmod.path_streams(config.seed, 0)
    path = sample_path_until(config.subordinator, delta, T, sub_rng)
    grid = build_grid(path, T)
    dw = bm_rng.standard_normal((len(path) - 1, model.dim_noise)) * math.sqrt(delta)
    traj = run_path(policy, model, grid, dw, args.scheme)
    n = len(traj.states)
    rho = grid.rho[:n]
    header = ("rho", "t_clipped", "E_delta") + tuple(f"x{i}" for i in range(model.dim_state))
    e = np.arange(n) * delta
    tc = model.model_time(rho)
    rows = [(float(rho[i]), float(tc[i]), float(e[i]), *map(float, traj.states[i]))
            for i in range(n)]
    comments = [("model", model.name), ("delta", repr(delta)), ("scheme", args.scheme),
                ("seed", config.seed)]
    if traj.blew_up:
        comments.append(("blowup_index", traj.blowup_index))
    text = table_csv(header, rows, comments)
    cfg = config.as_dict()
    cfg.update(delta=delta, scheme=args.scheme)
    _finish(args, "path", text, cfg, [], started)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tcsde",
        description="Truncated Euler-Maruyama for time-changed SDEs.",
    )
    sub = parser.add_subparsers(dest="command", metavar="{converge,moments,probe,laplace,path}")
    sub.required = True

    def common(p):
        p.add_argument("--out", help="output file (default: stdout); adds a .manifest.json sidecar")

    for name, fn, helptext in (
        ("converge", cmd_converge, "strong error vs step size and regression slope"),
        ("moments", cmd_moments, "sup-state of truncated vs plain EM across step sizes"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_experiment_flags(p)
        p.add_argument("--threads", type=int, help="worker threads (env TCSDE_THREADS)")
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("probe", help="numerical screening of the coefficient assumptions (JSON)")
    p.add_argument("--model", default="example1")
    p.add_argument("--n-probes", dest="n_probes", type=int, default=10_000)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("laplace", help="Laplace-transform check of stable increments")
    p.add_argument("--beta", default="0.5,0.7,0.9")
    p.add_argument("--delta", default="0.01,1")
    p.add_argument("--r", default="0.5,1,2")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--retries", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    common(p)
    p.set_defaults(func=cmd_laplace)

    p = sub.add_parser("path", help="dump one trajectory as CSV")
    _add_experiment_flags(p)
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--scheme", choices=SCHEMES, default=TRUNCATED_EM)
    common(p)
    p.set_defaults(func=cmd_path)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"tcsde {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"tcsde {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TcsdeError, OSError) as exc:
        print(f"tcsde {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
