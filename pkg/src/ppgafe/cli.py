"""Command line scenario runner.

    ppgafe run <scenario> --out DIR [--set section.key=value ...] [--seed N]
    ppgafe sweep <scenario> --key section.key --values v1,v2,... --out DIR [--jobs N]
    ppgafe list

``<scenario>`` is a path or the name of a bundled scenario (see ``list``).
Exit codes: 0 success, 2 configuration error, 3 controller ERROR events.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from . import config
from .controller import ConfigError
from .metrics import summarize
from .simulation import run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTROLLER = 3

log = logging.getLogger("ppgafe")


def bundled_scenarios() -> List[str]:
    root = resources.files("ppgafe") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def read_scenario_text(scenario: str) -> str:
    path = Path(scenario)
    if path.is_file():
        return path.read_text()
    if scenario in bundled_scenarios():
        return (resources.files("ppgafe") / "scenarios" / f"{scenario}.ini").read_text()
    raise ConfigError(f"scenario {scenario!r} is neither a file nor a bundled scenario")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_metrics(path, metrics: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in metrics.items():
            fh.write(f"{key} = {_fmt(value)}\n")


def read_metrics(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" = ")
        try:
            out[key] = int(value)
        except ValueError:
            out[key] = float(value)
    return out


def run(scenario: str, out_dir, overrides: Iterable[str] = (), seed: Optional[int] = None) -> int:
    """Run one scenario and write trace, metrics and event log into ``out_dir``."""
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"scenario.rng_seed={seed}")
    try:
        sf = config.parse(read_scenario_text(scenario), overrides)
        sim = config.to_sim_config(sf)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_simulation(sim)
    metrics = summarize(trace, skip=sf["output"]["analysis_skip"])
    o = sf["output"]
    trace.write_csv(out / o["trace"])
    trace.write_events(out / o["events"])
    write_metrics(out / o["metrics"], metrics)
    (out / "scenario.ini").write_text(config.serialize(sf))
    for w in trace.warnings:
        log.warning("%s", w)
    errors = [e for e in trace.events if e.kind == "ERROR"]
    for e in errors:
        log.error("t=%.3f s: %s", e.time, e.detail)
    return EXIT_CONTROLLER if errors else EXIT_OK


def _run_job(args):
    return run(*args)


def sweep(scenario: str, key: str, values: Sequence[str], out_dir,
          overrides: Iterable[str] = (), seed: Optional[int] = None, jobs: int = 1) -> int:
    """Run ``scenario`` once per value of ``key``; write ``summary.csv``."""
    values = [v.strip() for v in values if v.strip()]
    if not values:
        log.error("sweep needs at least one value")
        return EXIT_CONFIG
    if "." not in key:
        log.error("sweep key must look like section.key")
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subdirs = [out / f"{key}={v}" for v in values]
    jobs_args = [(scenario, d, [*overrides, f"{key}={v}"], seed) for v, d in zip(values, subdirs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_run_job, jobs_args))
    else:
        codes = [_run_job(a) for a in jobs_args]

    rows, fields = [], ["value", "exit_code"]
    for v, d, code in zip(values, subdirs, codes):
        row = {"value": v, "exit_code": code}
        metrics_path = d / "metrics.txt"
        if metrics_path.is_file():
            row.update(read_metrics(metrics_path))
        rows.append(row)
        fields += [k for k in row if k not in fields]
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppgafe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("scenario")
    r.add_argument("--out", required=True)
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--seed", type=int)

    s = sub.add_parser("sweep", help="simulate one scenario over a list of values")
    s.add_argument("scenario")
    s.add_argument("--key", required=True)
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--out", required=True)
    s.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)

    sub.add_parser("list", help="list bundled scenarios")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list":
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    if args.command == "run":
        return run(args.scenario, args.out, args.overrides, args.seed)
    return sweep(args.scenario, args.key, args.values.split(","), args.out,
                 args.overrides, args.seed, max(1, args.jobs))


if __name__ == "__main__":
    sys.exit(main())
