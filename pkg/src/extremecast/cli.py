"""Command-line entry point.

Reports go to stdout as JSON; diagnostics and errors go to stderr. Errors are
a single JSON line ``{"error": <code>, "message": <text>}`` with a non-zero
exit status.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import exloss as exl
from . import lab, metrics
from .errors import ConfigError, DegenerateRateError, DomainError, GridFormatError, SolverError
from .exbooster import BoosterConfig, ex_booster
from .grid import read_grid, write_grid

SWEEP_EPSILONS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0)
PUBLISHED_S1_RATIO = 0.9

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_COMPUTE = 4


class CliError(Exception):
    def __init__(self, code, message, status=EXIT_INPUT):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError("usage", message, EXIT_USAGE)


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _real_or_grid(value, name):
    """A float literal, or a path to a grid whose data is returned."""
    try:
        return float(value)
    except ValueError:
        pass
    if not os.path.exists(value):
        raise CliError("bad_argument", f"{name}: {value!r} is neither a number nor an existing file")
    return read_grid(value).data.astype(float)


def cmd_solve_scaling(args):
    sol = exl.solve_scaling(args.epsilon, args.s2, args.scale)
    sweep = exl.scaling_sweep([e * args.scale for e in SWEEP_EPSILONS], args.s2, args.scale)
    out = sol.as_dict()
    out["sweep"] = [{"epsilon": e, "s1": s1} for e, s1 in sweep]
    target_s1 = PUBLISHED_S1_RATIO * args.s2
    try:
        eps_09 = exl.epsilon_for_ratio(target_s1 / args.scale, args.s2 / args.scale) * args.scale
    except SolverError:
        eps_09 = None
    out["published_reference"] = {
        "epsilon": 0.1 * args.scale,
        "s2": args.s2,
        "stated_s1": target_s1,
        "epsilon_giving_stated_s1": eps_09,
        "note": "published constant s1=0.9*s2 at epsilon=0.1 does not solve the equal-area equation; "
        "the root there is reported in 'sweep', and epsilon_giving_stated_s1 is where s1=0.9*s2 holds",
    }
    _emit(out)


def _load_pair(args):
    pred, target = read_grid(args.pred), read_grid(args.target)
    if pred.shape != target.shape:
        raise CliError("shape_mismatch", f"pred {pred.shape} vs target {target.shape}")
    return pred, target


def cmd_exloss(args):
    pred, target = _load_pair(args)
    thr = exl.ExtremeThresholds(_real_or_grid(args.q_low, "--q-low"), _real_or_grid(args.q_high, "--q-high"))
    cfg = exl.ScalingConfig(thr, args.weight)
    p, t = pred.data.astype(float), target.data.astype(float)
    lo, hi = thr.broadcast(p.shape)
    per_channel = []
    for c, name in enumerate(pred.channel_names):
        ccfg = exl.ScalingConfig(exl.ExtremeThresholds(lo[c], hi[c]), args.weight)
        per_channel.append(
            {
                "channel": name,
                "exloss": exl.exloss(p[c], t[c], ccfg),
                "mse": exl.mse(p[c], t[c]),
                "combined": exl.combined_noise_loss(p[c], t[c], ccfg),
            }
        )
    _emit(
        {
            "exloss": exl.exloss(p, t, cfg),
            "mse": exl.mse(p, t),
            "combined": exl.combined_noise_loss(p, t, cfg),
            "under_weight": args.weight,
            "underestimated_fraction": float(np.mean(exl.underestimation_mask(p, t, thr))),
            "channels": per_channel,
        }
    )


def cmd_boost(args):
    field = read_grid(args.inp)
    noise = _real_or_grid(args.noise_scale, "--noise-scale")
    cfg = BoosterConfig(args.m, noise, args.seed)
    boosted = ex_booster(field.data.astype(float), cfg)
    out = field.with_data(boosted.astype(np.float32))
    write_grid(out, args.out)
    _emit(
        {
            "out": args.out,
            "sampling_nums": args.m,
            "seed": args.seed,
            "channels": [
                {
                    "channel": n,
                    "min_in": float(field.data[c].min()),
                    "max_in": float(field.data[c].max()),
                    "min_out": float(out.data[c].min()),
                    "max_out": float(out.data[c].max()),
                }
                for c, n in enumerate(field.channel_names)
            ],
        }
    )


def _threshold_lookup(path):
    if path is None:
        return None
    g = read_grid(path)
    table = {}
    for c, name in enumerate(g.channel_names):
        if "@" not in name:
            raise CliError("bad_thresholds", f"threshold channel {name!r} is not of the form <channel>@<level>")
        ch, lev = name.rsplit("@", 1)
        table[(ch, round(float(lev), 10))] = g.data[c].astype(float)
    return table


def cmd_metrics(args):
    pred, target = _load_pair(args)
    if not (args.rqe or args.rmse or args.sedi):
        args.rqe = args.rmse = True
    thresholds = _threshold_lookup(args.thresholds)
    records = []
    rmse = metrics.weighted_rmse(pred.data.astype(float), target.data.astype(float), target.latitudes) \
        if args.rmse else None
    for c, name in enumerate(pred.channel_names):
        p, t = pred.data[c].astype(float), target.data[c].astype(float)
        if args.rqe:
            try:
                records.append({"metric": "rqe", "channel": name, "level": None, "value": metrics.rqe(p, t)})
                for lev, v in zip(metrics.DEFAULT_QUANTILES, metrics.rqe_per_quantile(p, t)):
                    records.append({"metric": "rqe_quantile", "channel": name, "level": lev, "value": float(v)})
            except DomainError as exc:
                records.append({"metric": "rqe", "channel": name, "level": None, "value": None,
                                "error": "near_zero_quantile", "message": str(exc)})
        if args.rmse:
            records.append({"metric": "weighted_rmse", "channel": name, "level": None, "value": float(rmse[c])})
        for lev in args.sedi or ():
            if thresholds is not None:
                key = (name, round(lev, 10))
                if key not in thresholds:
                    raise CliError("bad_thresholds", f"no threshold for {name}@{lev}")
                thr = thresholds[key]
            else:
                thr = metrics.quantile(t, lev)
            counts = metrics.contingency(p, t, thr)
            rec = {"metric": "sedi", "channel": name, "level": lev}
            try:
                rec["value"] = metrics.sedi(counts, clamp=args.clamp)
            except DegenerateRateError as exc:
                rec.update(value=None, error="degenerate_rate", message=str(exc),
                           hit_rate=exc.hit_rate, false_alarm_rate=exc.false_alarm_rate)
            records.append(rec)
    _emit({"records": records})


def cmd_lab(args):
    cfg_dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg_dict = json.load(fh)
    cfg_dict["seed"] = args.seed
    cfg = lab.ExperimentConfig.from_dict(cfg_dict)
    report = lab.run(args.name, cfg)
    print(f"{args.name}: {report.wall_clock:.2f} s", file=sys.stderr)
    sys.stdout.write(report.to_json() + "\n")


def cmd_info(args):
    g = read_grid(args.path)
    c, h, w = g.shape
    _emit(
        {
            "dims": {"C": c, "H": h, "W": w},
            "latitudes": [float(g.latitudes[0]), float(g.latitudes[-1])],
            "longitudes": [float(g.longitudes[0]), float(g.longitudes[-1])],
            "channels": [
                {
                    "name": n,
                    "min": float(g.data[i].min()),
                    "max": float(g.data[i].max()),
                    "mean": float(g.data[i].astype(float).mean()),
                }
                for i, n in enumerate(g.channel_names)
            ],
        }
    )


def build_parser():
    p = _Parser(prog="extremecast", description="Extreme-value losses, booster and verification metrics.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve-scaling", help="solve the equal-area constraint for s1")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--s2", type=float, required=True)
    s.add_argument("--scale", type=float, default=1.0)
    s.set_defaults(func=cmd_solve_scaling)

    s = sub.add_parser("exloss", help="evaluate the extreme-aware loss between two grids")
    s.add_argument("--pred", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--q-low", required=True, help="number or grid path")
    s.add_argument("--q-high", required=True, help="number or grid path")
    s.add_argument("--weight", type=float, default=exl.DEFAULT_UNDER_WEIGHT)
    s.set_defaults(func=cmd_exloss)

    s = sub.add_parser("boost", help="apply the rank-preserving booster to a grid")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--m", type=int, default=50)
    s.add_argument("--noise-scale", default="0.1", help="number or grid path")
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_boost)

    s = sub.add_parser("metrics", help="RQE, SEDI and latitude-weighted RMSE")
    s.add_argument("--pred", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--rqe", action="store_true")
    s.add_argument("--rmse", action="store_true")
    s.add_argument("--sedi", type=float, nargs="+", metavar="LEVEL")
    s.add_argument("--thresholds", help="grid with channels named <channel>@<level>")
    s.add_argument("--clamp", action="store_true", help="clamp degenerate SEDI rates instead of failing")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("lab", help="run a desk-scale experiment")
    s.add_argument("name", choices=lab.EXPERIMENTS)
    s.add_argument("--config")
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_lab)

    s = sub.add_parser("info", help="describe a grid file")
    s.add_argument("path")
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
        return 0
    except CliError as exc:
        code, msg, status = exc.code, str(exc), exc.status
    except GridFormatError as exc:
        code, msg, status = exc.code, str(exc), EXIT_INPUT
    except (ConfigError, DomainError) as exc:
        code, msg, status = "invalid_input", str(exc), EXIT_INPUT
    except SolverError as exc:
        code, msg, status = "solver", str(exc), EXIT_COMPUTE
    except FileNotFoundError as exc:
        code, msg, status = "not_found", str(exc), EXIT_INPUT
    except (ValueError, KeyError) as exc:
        code, msg, status = "invalid_input", str(exc), EXIT_INPUT
    sys.stderr.write(json.dumps({"error": code, "message": msg}) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
