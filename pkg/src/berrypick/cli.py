"""Command-line front end: run scenarios, sweep parameters, benchmark.

Exit codes: 0 on success, 2 for configuration errors, 3 for IO errors.
Every artifact embeds the config hash and seed; all wall-clock-derived
values (localization latency, run duration) are kept in sidecar files so
reruns with identical inputs are byte-identical everywhere else.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .bench import run_bench
from .config import (
    build_localization,
    build_rig,
    build_scenario,
    config_hash,
    load_config,
    resolve_config,
)
from .controller import CycleReport, cycle_metrics, run_harvest
from .errors import BerrypickError, ConfigError
from .geometry import dump_cloud, load_cloud, merge_clouds, transform_cloud
from .localization import localize

CYCLES_HEADER = ["fruit_id", "cycle_time", "cut_time", "outcome"]


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, newline="\n")
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cycles_to_csv(reports: list[CycleReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CYCLES_HEADER)
    for r in reports:
        writer.writerow([r.fruit_id, repr(r.cycle_time), repr(r.cut_time), r.outcome])
    return buf.getvalue()


def cycles_from_csv(text: str) -> list[CycleReport]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CYCLES_HEADER:
        raise ValueError(f"unexpected cycles header: {header}")
    return [
        CycleReport(int(row[0]), float(row[1]), float(row[2]), row[3])
        for row in reader
        if row
    ]


def metrics_to_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"


def resolve_config_arg(arg: str) -> dict:
    """Accept a filesystem path or the name of a packaged scenario."""
    path = Path(arg)
    if path.exists():
        return load_config(path)
    name = arg if arg.endswith(".json") else arg + ".json"
    pkg_file = resources.files("berrypick.scenarios").joinpath(name)
    if pkg_file.is_file():
        return resolve_config(json.loads(pkg_file.read_text()))
    raise ConfigError(f"config not found: {arg!r} (no such file or packaged scenario)")


def run_one(cfg: dict, seed: int, run_dir: Path, dump_clouds: Path | None = None) -> tuple[dict, dict]:
    """Execute one harvest run and write its artifacts; returns (metrics, wallclock)."""
    built = build_scenario(cfg, seed)
    chash = config_hash(cfg)
    telemetry: dict = {}
    wall_start = time.perf_counter()
    log, reports = run_harvest(
        built.scene,
        built.rig,
        built.params,
        built.robot,
        built.geom,
        built.cut,
        seed,
        dt=built.dt,
        laser_timeout=built.laser_timeout,
        box_source=built.box_source,
        box_offset=built.box_offset,
        derive_duty=built.derive_duty,
        config_hash=chash,
        telemetry=telemetry,
    )
    wall_s = time.perf_counter() - wall_start

    run_dir.mkdir(parents=True, exist_ok=True)
    log.to_jsonl(run_dir / "events.jsonl")
    _write_text(run_dir / "cycles.csv", cycles_to_csv(reports))
    metrics = cycle_metrics(log)
    metrics["config_hash"] = chash
    metrics["seed"] = seed
    _write_text(run_dir / "metrics.json", metrics_to_json(metrics))
    # manifest ties config hash + seed to the checksum of every
    # deterministic artifact; the wall-clock sidecar stays outside it
    manifest = {
        "config_hash": chash,
        "seed": seed,
        "files": {
            name: hashlib.sha256((run_dir / name).read_bytes()).hexdigest()
            for name in ("events.jsonl", "cycles.csv", "metrics.json")
        },
    }
    _write_text(run_dir / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    wallclock = {
        "localization_ms": telemetry.get("duration_ms"),
        "wall_s": wall_s,
    }
    _write_text(run_dir / "wallclock.json", json.dumps(wallclock, sort_keys=True, indent=2) + "\n")

    if dump_clouds is not None and "clouds" in telemetry:
        dump_clouds.mkdir(parents=True, exist_ok=True)
        c1, c2 = telemetry["clouds"]
        dump_cloud(c1, dump_clouds / "cam1.txt")
        dump_cloud(c2, dump_clouds / "cam2.txt")
        merged = merge_clouds(
            transform_cloud(built.rig.cam1.pose, c1, "base"),
            transform_cloud(built.rig.cam2.pose, c2, "base"),
        )
        dump_cloud(merged, dump_clouds / "merged_base.txt")
    return metrics, wallclock


def cmd_run(args) -> int:
    cfg = resolve_config_arg(args.config)
    seeds = [args.seed] if args.seed is not None else cfg["seeds"]
    out_root = Path(args.out or cfg["out"] or f"out/{cfg['name']}")
    for seed in seeds:
        run_dir = out_root / f"seed{seed}"
        dump_dir = Path(args.dump_clouds) / f"seed{seed}" if args.dump_clouds else None
        metrics, _ = run_one(cfg, seed, run_dir, dump_dir)
        print(f"seed {seed}: {metrics['n_harvested']}/{metrics['n_ripe']} harvested -> {run_dir}")
    return 0


_AXIS_VALUES = {
    "offset": ("sweep", "offsets_mm"),
    "velocity": ("sweep", "velocity_scales"),
    "power": ("sweep", "powers"),
    "noise": ("sweep", "noise_sigmas"),
}


def apply_sweep_value(cfg: dict, axis: str, value) -> dict:
    point = copy.deepcopy(cfg)
    if axis == "offset":
        point["boxes"]["offset"] = [0.0, value / 1000.0, 0.0]
    elif axis == "velocity":
        point["robot"]["velocity_scale"] = value
    elif axis == "power":
        point["cut"]["laser_power"] = value
    elif axis == "noise":
        point["rig"]["cam1"]["depth_noise_sigma"] = value
        point["rig"]["cam2"]["depth_noise_sigma"] = value
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return point


def _sweep_job(job) -> tuple:
    cfg_point, axis, value, seed, run_dir = job
    metrics, wallclock = run_one(cfg_point, seed, Path(run_dir))
    return axis, value, seed, metrics, wallclock


def cmd_sweep(args) -> int:
    cfg = resolve_config_arg(args.config)
    axis = args.axis
    section, key = _AXIS_VALUES[axis]
    values = cfg[section][key]
    if not values:
        raise ConfigError(f"sweep.{key} is empty; nothing to sweep")
    out_root = Path(args.out or cfg["out"] or f"out/{cfg['name']}_sweep_{axis}")
    out_root.mkdir(parents=True, exist_ok=True)

    jobs = []
    for value in values:
        for seed in cfg["seeds"]:
            point = apply_sweep_value(cfg, axis, value)
            run_dir = out_root / f"{axis}_{value}_seed{seed}"
            jobs.append((point, axis, value, seed, str(run_dir)))

    workers = int(os.environ.get("BERRYPICK_THREADS", "1") or "1")
    workers = max(1, min(workers, len(jobs)))
    results = []
    if workers == 1:
        for job in jobs:
            results.append(_sweep_job(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))

    rows = []
    wall_rows = []
    for axis_name, value, seed, metrics, wallclock in results:
        rows.append(
            {
                "axis": axis_name,
                "value": value,
                "seed": seed,
                "aggregate": 0,
                "n_ripe": metrics["n_ripe"],
                "n_harvested": metrics["n_harvested"],
                "n_missed_trap": metrics["n_missed_trap"],
                "n_not_detected": metrics["n_not_detected"],
                "success_rate": metrics["success_rate"],
                "mean_cycle_time": metrics["mean_cycle_time"],
                "mean_cut_time": metrics["mean_cut_time"],
                "config_hash": metrics["config_hash"],
            }
        )
        wall_rows.append(
            {
                "axis": axis_name,
                "value": value,
                "seed": seed,
                "localization_ms": wallclock["localization_ms"],
                "wall_s": wallclock["wall_s"],
            }
        )

    for value in values:
        sub = [r for r in rows if r["value"] == value and not r["aggregate"]]
        def mean_of(field):
            vals = [r[field] for r in sub if r[field] is not None]
            return sum(vals) / len(vals) if vals else None
        rows.append(
            {
                "axis": axis,
                "value": value,
                "seed": "",
                "aggregate": 1,
                "n_ripe": sum(r["n_ripe"] for r in sub),
                "n_harvested": sum(r["n_harvested"] for r in sub),
                "n_missed_trap": sum(r["n_missed_trap"] for r in sub),
                "n_not_detected": sum(r["n_not_detected"] for r in sub),
                "success_rate": mean_of("success_rate"),
                "mean_cycle_time": mean_of("mean_cycle_time"),
                "mean_cut_time": mean_of("mean_cut_time"),
                "config_hash": sub[0]["config_hash"] if sub else "",
            }
        )

    header = [
        "axis", "value", "seed", "aggregate", "n_ripe", "n_harvested",
        "n_missed_trap", "n_not_detected", "success_rate",
        "mean_cycle_time", "mean_cut_time", "config_hash",
    ]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) for h in header])
    _write_text(out_root / "sweep.csv", buf.getvalue())

    wall_header = ["axis", "value", "seed", "localization_ms", "wall_s"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(wall_header)
    for r in wall_rows:
        writer.writerow([_fmt(r[h]) for h in wall_header])
    _write_text(out_root / "sweep_wallclock.csv", buf.getvalue())

    print(f"swept {axis} over {len(values)} values x {len(cfg['seeds'])} seeds -> {out_root}")
    return 0


def cmd_bench(args) -> int:
    params = None
    rig = None
    if args.config:
        cfg = resolve_config_arg(args.config)
        params = build_localization(cfg)
        rig = build_rig(cfg)
    report = run_bench(args.size, args.reps, seed=args.seed, params=params, rig=rig)
    text = json.dumps(report, sort_keys=True, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_text(out, text + "\n")
    return 0


def cmd_localize(args) -> int:
    cfg = resolve_config_arg(args.params)
    params = build_localization(cfg)
    rig = build_rig(cfg)
    c1 = load_cloud(args.cloud1)
    c2 = load_cloud(args.cloud2)
    boxes = localize(c1, c2, rig.cam1.pose, rig.cam2.pose, params)
    payload = {
        "units": "m",
        "boxes": [
            {
                "index": b.index,
                "min": [b.box.min.x, b.box.min.y, b.box.min.z],
                "max": [b.box.max.x, b.box.max.y, b.box.max.z],
                "point_count": b.point_count,
            }
            for b in boxes
        ],
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        _write_text(Path(args.out), text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="berrypick",
        description="Deterministic strawberry-harvesting simulator and perception harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its artifacts")
    p_run.add_argument("--config", required=True, help="config path or packaged scenario name")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed list")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--dump-clouds", default=None, help="also dump cam1/cam2/base clouds here")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the cross product of a sweep axis and the seed list")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True, choices=sorted(_AXIS_VALUES))
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("bench", help="time the localization pipeline on synthetic clouds")
    p_bench.add_argument("--size", type=int, required=True, help="total merged cloud size")
    p_bench.add_argument("--reps", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--config", default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_loc = sub.add_parser("localize", help="run localization on dumped cloud files")
    p_loc.add_argument("--cloud1", required=True)
    p_loc.add_argument("--cloud2", required=True)
    p_loc.add_argument("--params", required=True, help="config supplying localization params and rig")
    p_loc.add_argument("--out", default=None)
    p_loc.set_defaults(func=cmd_localize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3
    except BerrypickError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
