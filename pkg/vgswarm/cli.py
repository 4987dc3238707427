"""
Command-line entry points.

Exit codes: 0 ok, 1 calibration or solver failure, 2 bad input (missing file,
invalid scenario, refusing to overwrite), 3 run finished without entrapment.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd
from dotenv import load_dotenv

from vgswarm.config import Config
from vgswarm.core import metrics
from vgswarm.core.batch import run_batch, run_once
from vgswarm.core.camera import CameraRig
from vgswarm.core.estimation import calibrate, fits_to_dict
from vgswarm.core.grn import field_dump_frame
from vgswarm.core.runlog import prepare_output, write_frame, write_runlog
from vgswarm.core.scenario import PRESETS, build_preset, describe_presets, load_scenario, save_scenario, validate
from vgswarm.errors import FitError, OutputExistsError, ScenarioError, SolverError
from vgswarm.utils.logger import logger
from vgswarm.utils.rng import stream

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NO_SUCCESS = 3


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _is_preset(ref):
    return not Path(str(ref)).is_file() and str(ref) in PRESETS


def cmd_calibrate(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    out = prepare_output(args.out, args.force)
    params_path = prepare_output(out.with_suffix(".json"), args.force)
    fits, table = calibrate(CameraRig(), scenario.noise, stream(scenario.seed, "calibration"),
                            source=scenario.calibration_source)
    write_frame(table, out, force=True)
    params_path.write_text(json.dumps(fits_to_dict(fits), indent=2))
    for kind, fit in sorted(fits.items(), key=lambda kv: kv[0].value):
        print(f"{kind.value:9s} alpha={fit.alpha:.4f} beta={fit.beta:.4f} rmse={fit.rmse:.4f} m "
              f"({fit.n_samples} samples)")
    return EXIT_OK


def cmd_run(args):
    scenario = load_scenario(args.scenario, distance=args.distance, seed=args.seed)
    if args.profile:
        scenario = validate(replace(scenario, profile=args.profile))
    out_dir = Path(args.out_dir or Path(Config.VGSWARM_OUT_DIR) / f"{scenario.name}-seed{scenario.seed}")
    for name in ("runlog.csv", "collisions.csv", "detections.csv", "report.csv", "traj_plotdata.csv"):
        prepare_output(out_dir / name, args.force)

    sink = None
    if args.dump_fields:
        def sink(tick, agent_id, fields):
            path = out_dir / "fields" / f"agent{agent_id}_tick{tick:05d}.csv"
            write_frame(field_dump_frame(fields), path, force=args.force)

    log, rep, row = run_once(scenario, seed=scenario.seed, strict=args.strict_success, parallel=args.parallel,
                             latency_ticks=args.latency_ticks, max_ticks=args.max_ticks, field_sink=sink)
    write_runlog(log, out_dir, force=True)
    write_frame(pd.DataFrame([row], columns=metrics.REPORT_COLUMNS), out_dir / "report.csv", force=True)
    write_frame(metrics.plot_data(log, rep), out_dir / "traj_plotdata.csv", force=True)

    if rep.success_tick is None:
        print(f"no entrapment within {log.n_ticks} ticks; logs in {out_dir}")
        return EXIT_NO_SUCCESS
    print(f"entrapment at tick {rep.success_tick} ({rep.success_tick * log.dt:.2f} s), "
          f"avg speed {rep.avg_speed:.2f} m/s, collisions {rep.collisions}; logs in {out_dir}")
    return EXIT_OK


def cmd_batch(args):
    scenario = load_scenario(args.scenario)
    distances = args.distances or [scenario.mean_initial_distance()]
    out_dir = Path(args.out_dir or Path(Config.VGSWARM_OUT_DIR) / f"{scenario.name}-batch{args.base_seed}")
    report_path = prepare_output(out_dir / "report.csv", args.force)
    table_path = prepare_output(out_dir / "table.csv", args.force)

    reports, table = run_batch(scenario, args.seeds, distances, base_seed=args.base_seed,
                               workers=args.workers or Config.VGSWARM_WORKERS, strict=args.strict_success,
                               checkpoints=args.checkpoints, preset=_is_preset(args.scenario))
    write_frame(reports, report_path, force=True)
    write_frame(table, table_path, force=True)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_report(args):
    paths = []
    for run_dir in args.run_dirs:
        path = Path(run_dir) / "report.csv"
        if not path.is_file():
            raise FileNotFoundError(f"{path} not found")
        paths.append(path)
    table = metrics.summarize(metrics.load_reports(paths), args.checkpoints)
    write_frame(table, args.out, force=args.force)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_presets(args):
    for item in describe_presets():
        print(f"{item['name']:18s} {item['description']}")
    return EXIT_OK


def cmd_export_preset(args):
    scenario = build_preset(args.name, args.distance, args.seed)
    save_scenario(scenario, prepare_output(args.out, args.force))
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="vgswarm", description="Vision-based swarm entrapment experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit per-kind distance power laws")
    p.add_argument("scenario", help="scenario JSON file or preset name")
    p.add_argument("--out", required=True, help="calibration CSV; fit parameters go next to it as .json")
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario", help="scenario JSON file or preset name")
    p.add_argument("--seed", type=int)
    p.add_argument("--distance", type=float, help="initial captor distance for presets")
    p.add_argument("--out-dir")
    p.add_argument("--dump-fields", action="store_true", help="write per-tick fields of agent 0")
    p.add_argument("--strict-success", action="store_true", help="require two captors per sector")
    p.add_argument("--latency-ticks", type=int)
    p.add_argument("--profile", choices=("sim", "real"))
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--max-ticks", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="success-rate table over seeds and distances")
    p.add_argument("scenario", help="scenario JSON file or preset name")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--distances", type=_floats)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--checkpoints", type=_floats, default=list(metrics.DEFAULT_CHECKPOINTS))
    p.add_argument("--strict-success", action="store_true")
    p.add_argument("--out-dir")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("report", help="summarize report.csv files of earlier runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoints", type=_floats, default=list(metrics.DEFAULT_CHECKPOINTS))
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("presets", help="list shipped scenarios")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("export-preset", help="write a preset as scenario JSON")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", required=True)
    p.add_argument("--distance", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_export_preset)
    return parser


def main(argv=None):
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seeds", 1) is not None and getattr(args, "seeds", 1) < 1:
        parser.error("--seeds must be at least 1")
    try:
        return args.func(args)
    except (FileNotFoundError, ScenarioError, OutputExistsError) as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (FitError, SolverError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
