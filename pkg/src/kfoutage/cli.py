"""Command-line front end.

    kfoutage simulate --rho 0.95 --sigma-u2 1 --sigma-v2 1 --snr-db 6 --out run1
    kfoutage solve    --config fig2.cfg --grid-size 2048
    kfoutage sweep    --config fig3.cfg --var mth --start 0.05 --stop 1 --num 20

Every CSV starts with ``#`` lines holding the fully resolved configuration,
so a run can be replayed from its own output.  Exit status: 0 success,
1 usage or configuration error, 2 solver non-convergence.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import high_snr_outage, kappa_bounds, outage_bounds
from .density import kappa_from_density, outage_from_density, solve_stationary, write_density_csv
from .exceptions import KFOutageError, NoConvergence
from .model import RayleighChannel, SystemParams, check_params, lambda_to_snr_db, snr_db_to_lambda, validate_params
from .montecarlo import empirical_distribution, estimate_outage_mc, simulate_chain, spawn_seeds

EXIT_OK, EXIT_USAGE, EXIT_NOCONV = 0, 1, 2

# option name -> (type, default); the config file uses the same names
OPTIONS = {
    "rho": (float, None),
    "sigma_u2": (float, None),
    "sigma_v2": (float, None),
    "lambda": (float, None),
    "snr_db": (float, None),
    "mth": (float, None),
    "steps": (int, 10**6),
    "burn_in": (int, 1000),
    "seed": (int, 0),
    "m0": (float, None),
    "bins": (int, 200),
    "grid_size": (int, 1024),
    "tol": (float, 1e-10),
    "max_iter": (int, 10_000),
    "out": (str, "results"),
    # sweep only
    "var": (str, None),
    "values": (float, None),
    "start": (float, None),
    "stop": (float, None),
    "num": (int, None),
    "log": (bool, False),
    "skip_mc": (bool, False),
    "skip_density": (bool, False),
}
LIST_OPTIONS = {"mth", "values"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    params: SystemParams
    lam: float | None
    snr_db: float | None
    thresholds: list = field(default_factory=list)
    steps: int = 10**6
    burn_in: int = 1000
    seed: int = 0
    m0: float | None = None
    bins: int = 200
    grid_size: int = 1024
    tol: float = 1e-10
    max_iter: int = 10_000
    out: str = "results"
    extra: dict = field(default_factory=dict)

    @property
    def channel(self):
        return RayleighChannel(self.lam)

    def header(self, command):
        lines = [f"kfoutage {__version__} {command}"]
        p = asdict(self.params)
        for key in ("rho", "sigma_u2", "sigma_v2"):
            lines.append(f"{key} = {p[key]!r}")
        for key in ("lam", "snr_db", "steps", "burn_in", "seed", "m0", "bins", "grid_size", "tol", "max_iter"):
            name = "lambda" if key == "lam" else key
            lines.append(f"{name} = {getattr(self, key)!r}")
        lines.append("mth = " + ",".join(repr(t) for t in self.thresholds))
        for key, value in self.extra.items() if command == "sweep" else ():
            if isinstance(value, list):
                value = ",".join(repr(v) for v in value)
            else:
                value = repr(value)
            lines.append(f"{key} = {value}")
        return lines


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        typ = OPTIONS[key][0]
        try:
            if key in LIST_OPTIONS:
                out[key] = [typ(v) for v in value.split(",") if v.strip()]
            elif typ is bool:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                out[key] = typ(value) if value not in ("", "None") else None
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--rho", type=float, default=S)
    p.add_argument("--sigma-u2", dest="sigma_u2", type=float, default=S)
    p.add_argument("--sigma-v2", dest="sigma_v2", type=float, default=S)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lambda", type=float, default=S, help="Rayleigh rate 1/E[gamma]")
    g.add_argument("--snr-db", dest="snr_db", type=float, default=S, help="mean SNR in dB")
    p.add_argument("--mth", type=float, action="append", default=S, help="outage threshold (repeatable)")
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--m0", type=float, default=S, help="initial variance of the chain")
    p.add_argument("--grid-size", dest="grid_size", type=int, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--out", default=S, help="output directory")


def build_parser():
    parser = _Parser(prog="kfoutage", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte Carlo histogram and outage estimates")
    _add_common(p)
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("solve", help="stationary density by fixed-point iteration")
    _add_common(p)

    p = sub.add_parser("bounds", help="closed-form kappa and outage bounds")
    _add_common(p)

    p = sub.add_parser("sweep", help="outage, bounds and kappa over lambda or M_th")
    _add_common(p)
    S = argparse.SUPPRESS
    p.add_argument("--var", choices=["lambda", "mth"], default=S)
    p.add_argument("--values", type=float, action="append", default=S, help="sweep point (repeatable)")
    p.add_argument("--start", type=float, default=S)
    p.add_argument("--stop", type=float, default=S)
    p.add_argument("--num", type=int, default=S)
    p.add_argument("--log", action="store_true", default=S, help="geometric spacing")
    p.add_argument("--skip-mc", dest="skip_mc", action="store_true", default=S)
    p.add_argument("--skip-density", dest="skip_density", action="store_true", default=S)

    p = sub.add_parser("validate", help="check a parameter set")
    _add_common(p)
    return parser


def resolve(ns, need_channel=True):
    """Merge defaults < config file < flags into a RunConfig."""
    merged = {k: d for k, (_, d) in OPTIONS.items()}
    if getattr(ns, "config", None):
        merged.update(read_config(ns.config))
    merged.update({k: v for k, v in vars(ns).items() if k in OPTIONS})

    missing = [k for k in ("rho", "sigma_u2", "sigma_v2") if merged[k] is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    lam, snr_db = merged["lambda"], merged["snr_db"]
    if lam is not None and snr_db is not None:
        raise UsageError("--lambda and --snr-db are mutually exclusive")
    if lam is None and snr_db is None:
        if need_channel:
            raise UsageError("one of --lambda or --snr-db is required")
    elif lam is None:
        lam = snr_db_to_lambda(snr_db)
    else:
        snr_db = float(lambda_to_snr_db(lam)) if lam > 0 else None
    if lam is not None and not lam > 0:
        raise UsageError("lambda must be > 0")

    thresholds = sorted(merged["mth"] or [])
    if any(t <= 0 for t in thresholds):
        raise UsageError("thresholds must be > 0")
    for key in ("steps", "bins", "grid_size", "max_iter"):
        if merged[key] < 1:
            raise UsageError(f"{key} must be >= 1")
    if merged["burn_in"] < 0:
        raise UsageError("burn_in must be >= 0")

    params = SystemParams(merged["rho"], merged["sigma_u2"], merged["sigma_v2"])
    extra = {k: merged[k] for k in ("var", "values", "start", "stop", "num", "log", "skip_mc", "skip_density")}
    return RunConfig(
        params=params,
        lam=lam,
        snr_db=snr_db,
        thresholds=thresholds,
        steps=merged["steps"],
        burn_in=merged["burn_in"],
        seed=merged["seed"],
        m0=merged["m0"],
        bins=merged["bins"],
        grid_size=merged["grid_size"],
        tol=merged["tol"],
        max_iter=merged["max_iter"],
        out=merged["out"],
        extra=extra,
    )


def _outdir(cfg):
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, header, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _default_thresholds(cfg):
    s2 = cfg.params.sigma_u2
    return [s2 * k / 20 for k in range(1, 21)]


def run_simulate(cfg, command="simulate"):
    check_params(cfg.params, cfg.channel)
    thresholds = cfg.thresholds or _default_thresholds(cfg)
    m0 = cfg.m0 if cfg.m0 is not None else cfg.params.sigma_u2
    traj = simulate_chain(cfg.params, cfg.channel, cfg.steps, m0, cfg.seed, cfg.burn_in)
    hist = empirical_distribution(traj, cfg.bins)
    out = _outdir(cfg)
    header = cfg.header(command)
    _write_csv(out / "histogram.csv", header, ["bin_center", "density"],
               ([_fmt(c), _fmt(d)] for c, d in zip(hist.centers, hist.density)))
    est = estimate_outage_mc(traj, thresholds)
    _write_csv(out / "outage.csv", header, ["M_th", "p_hat", "ci_lo", "ci_hi"],
               ([_fmt(e.M_th), _fmt(e.p_hat), _fmt(e.ci_low), _fmt(e.ci_high)] for e in est))
    print(f"wrote {out / 'histogram.csv'} and {out / 'outage.csv'}")
    return EXIT_OK


def run_solve(cfg):
    check_params(cfg.params, cfg.channel)
    density, report = solve_stationary(cfg.params, cfg.channel, tol=cfg.tol, max_iter=cfg.max_iter, n_nodes=cfg.grid_size)
    out = _outdir(cfg)
    header = cfg.header("solve")
    with open(out / "density.csv", "w", newline="") as fh:
        write_density_csv(density, fh, header)
    text = "".join(f"# {line}\n" for line in header) + report.summary()
    for t in cfg.thresholds:
        text += f"p_out[{t!r}] = {outage_from_density(density, t)!r}\n"
    (out / "solve_report.txt").write_text(text)
    print(report.summary(), end="")
    print(f"wrote {out / 'density.csv'} and {out / 'solve_report.txt'}")
    return EXIT_OK


def run_bounds(cfg):
    check_params(cfg.params, cfg.channel)
    kb = kappa_bounds(cfg.params, cfg.lam)
    thresholds = cfg.thresholds or _default_thresholds(cfg)
    rows = []
    for t in thresholds:
        lo, hi = outage_bounds(cfg.params, cfg.lam, t) if t <= cfg.params.sigma_u2 else (None, None)
        rows.append([_fmt(t), _fmt(lo), _fmt(hi), _fmt(high_snr_outage(cfg.params, cfg.lam, t))])
    out = _outdir(cfg)
    header = cfg.header("bounds") + [
        f"a_kappa = {kb.a_kappa!r}",
        f"kappa_l = {kb.kappa_l!r}",
        f"kappa_u = {kb.kappa_u!r}",
        f"variant = {kb.variant}",
    ]
    _write_csv(out / "bounds.csv", header, ["M_th", "p_lower", "p_upper", "p_highsnr"], rows)
    print(f"a_kappa = {kb.a_kappa!r}\nkappa_l = {kb.kappa_l!r}\nkappa_u = {kb.kappa_u!r}")
    print(f"wrote {out / 'bounds.csv'}")
    return EXIT_OK


SWEEP_COLUMNS = ["sweep_var", "value", "p_mc", "p_density", "p_lower", "p_upper", "p_highsnr",
                 "kappa_l", "kappa_u", "kappa_density"]


def _sweep_points(cfg):
    x = cfg.extra
    if x["values"]:
        pts = list(x["values"])
    elif None not in (x["start"], x["stop"], x["num"]):
        if x["log"]:
            pts = list(np.geomspace(x["start"], x["stop"], x["num"]))
        else:
            pts = list(np.linspace(x["start"], x["stop"], x["num"]))
    else:
        raise UsageError("sweep needs --values or --start/--stop/--num")
    if len(pts) < 2:
        raise UsageError("sweep needs at least 2 points")
    if any(not p > 0 for p in pts):
        raise UsageError("sweep values must be > 0")
    return [float(p) for p in pts]


def _sweep_row(cfg, lam, mth, traj, density):
    params = cfg.params
    p_mc = p_den = lo = hi = p_hs = kd = None
    kb = kappa_bounds(params, lam)
    if density is not None:
        kd = kappa_from_density(density, params, lam)
    if mth is not None:
        if traj is not None:
            p_mc = estimate_outage_mc(traj, [mth])[0].p_hat
        if density is not None:
            p_den = outage_from_density(density, mth)
        if mth <= params.sigma_u2:
            lo, hi = outage_bounds(params, lam, mth)
        p_hs = min(high_snr_outage(params, lam, mth), 1.0)
    return [p_mc, p_den, lo, hi, p_hs, kb.kappa_l, kb.kappa_u, kd]


def run_sweep(cfg):
    var = cfg.extra["var"]
    if var not in ("lambda", "mth"):
        raise UsageError("sweep needs --var lambda or --var mth")
    pts = _sweep_points(cfg)
    params = cfg.params
    check_params(params)
    skip_mc, skip_den = cfg.extra["skip_mc"], cfg.extra["skip_density"]
    m0 = cfg.m0 if cfg.m0 is not None else params.sigma_u2
    rows = []
    if var == "mth":
        if cfg.lam is None:
            raise UsageError("an M_th sweep needs --lambda or --snr-db")
        channel = cfg.channel
        traj = None if skip_mc else simulate_chain(params, channel, cfg.steps, m0, cfg.seed, cfg.burn_in)
        density = None
        if not skip_den and params.stable:
            density, _ = solve_stationary(params, channel, tol=cfg.tol, max_iter=cfg.max_iter, n_nodes=cfg.grid_size)
        for mth in pts:
            rows.append(["mth", mth] + _sweep_row(cfg, cfg.lam, mth, traj, density))
    else:
        if len(cfg.thresholds) > 1:
            raise UsageError("a lambda sweep takes at most one --mth")
        mth = cfg.thresholds[0] if cfg.thresholds else None
        seeds = spawn_seeds(cfg.seed, len(pts))
        for lam, seed in zip(pts, seeds):
            channel = RayleighChannel(lam)
            traj = None
            if not skip_mc and mth is not None:
                traj = simulate_chain(params, channel, cfg.steps, m0, seed, cfg.burn_in)
            density = None
            if not skip_den and params.stable:
                density, _ = solve_stationary(params, channel, tol=cfg.tol, max_iter=cfg.max_iter, n_nodes=cfg.grid_size)
            rows.append(["lambda", lam] + _sweep_row(cfg, lam, mth, traj, density))
    out = _outdir(cfg)
    extra = dict(cfg.extra)
    extra["values"] = pts
    cfg = RunConfig(**{**cfg.__dict__, "extra": extra})
    _write_csv(out / "sweep.csv", cfg.header("sweep"), SWEEP_COLUMNS,
               ([r[0], _fmt(r[1])] + [_fmt(v) for v in r[2:]] for r in rows))
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return EXIT_OK


def run_validate(cfg):
    channel = cfg.channel if cfg.lam is not None else None
    issues = validate_params(cfg.params, channel)
    for issue in issues:
        print(f"{issue.severity}: {issue.code}: {issue.message}")
    if any(i.severity == "error" for i in issues):
        return EXIT_USAGE
    print("valid" if not issues else "valid with warnings")
    return EXIT_OK


COMMANDS = {
    "simulate": run_simulate,
    "solve": run_solve,
    "bounds": run_bounds,
    "sweep": run_sweep,
    "validate": run_validate,
}


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve(ns, need_channel=ns.command not in ("sweep", "validate"))
        return COMMANDS[ns.command](cfg)
    except NoConvergence as exc:
        print(f"kfoutage: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (UsageError, KFOutageError, OSError) as exc:
        print(f"kfoutage: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
