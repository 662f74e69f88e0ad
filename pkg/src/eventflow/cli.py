"""Command-line front end.

Exit codes: 0 ok, 2 config or input error, 3 data error, 4 resource limit.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import ascgrid, flows, ingest, report, synth
from .config import PIPELINE_KEYS, PipelineConfig, parse_kv_text
from .errors import (
    ConfigError,
    DataError,
    EventFlowError,
    ResourceLimitError,
    StoreReadError,
)
from .pipeline import Pipeline, StageError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RESOURCE = 0, 2, 3, 4

def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, ResourceLimitError):
        return EXIT_RESOURCE
    if isinstance(exc, (ConfigError, StoreReadError, FileNotFoundError, IsADirectoryError,
                        PermissionError)):
        return EXIT_CONFIG
    return EXIT_DATA

def _load_config(args, required=("records", "regions", "corridor")) -> PipelineConfig:
    if args.config is None:
        raise ConfigError("--config is required for this subcommand")
    cfg = PipelineConfig.from_file(args.config)
    overrides = {}
    for item in args.set or ():
        overrides.update(parse_kv_text(item, "--set"))
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    cfg.update(overrides, base_dir=Path.cwd())
    cfg.validate(required)
    return cfg

def _pipeline(args, **kw) -> Pipeline:
    return Pipeline(_load_config(args, **kw))

# -- subcommands ------------------------------------------------------------

def cmd_synth(args):
    spec, outputs = synth.load_scenario(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.spec).resolve().parent
    out_dir.mkdir(parents=True, exist_ok=True)
    store, truth = synth.generate(spec)
    store_path, truth_path = out_dir / outputs["store"], out_dir / outputs["truth"]
    synth.write_outputs(spec, store, truth, store_path, truth_path)
    print(f"wrote {len(store)} records for {len(truth)} users to {store_path}")
    print(f"wrote ground truth to {truth_path}")

def cmd_example_inputs(args):
    paths = synth.write_standard_inputs(args.directory, seed=args.seed or 42, cohort_size=args.cohort_size)
    for name, p in paths.items():
        print(f"{name}: {p}")

def cmd_filter(args):
    p = _pipeline(args)
    p.write_event_records()
    print(f"{p.counts['event_records']} event records -> {p.out_dir / 'event_records.ndjson'}")
    if p.counts.get("malformed_lines"):
        print(f"skipped {p.counts['malformed_lines']} malformed line(s)")

def cmd_users(args):
    p = _pipeline(args)
    p.write_event_users()
    print(f"{p.counts['event_users']} event users -> {p.out_dir / 'event_users.csv'}")

def cmd_histories(args):
    p = _pipeline(args)
    p.write_histories()
    print(f"{p.counts['history_records']} history records for {p.counts['users_with_history']} users "
          f"({p.counts['users_empty_history']} empty) -> {p.out_dir / 'histories.ndjson'}")

def cmd_stats(args):
    p = _pipeline(args)
    p.write_history_stats()
    _, aggregate = p.history_stats()
    cols = ingest.HISTORY_COLUMNS
    print("statistic  " + "  ".join(cols))
    for name, row in aggregate.items():
        print(f"{name:<10} " + "  ".join(f"{row[c]:.4g}" for c in cols))

def cmd_surface(args):
    p = _pipeline(args, required=("records",))
    if args.user not in set(p.store.users()):
        raise DataError(f"unknown user {args.user!r}")
    fixed, variable, _ = p.user_surfaces(args.user)
    out = p._path(f"surface_{args.user}_fixed.asc")
    ascgrid.write_asc(out, fixed)
    out_vb = p._path(f"surface_{args.user}_variable.asc")
    ascgrid.write_asc(out_vb, variable)
    if p.cfg.figures:
        report.plot_surfaces(fixed, variable, p._figure(f"surface_{args.user}.png"), title=args.user)
    print(f"fixed max {fixed.max:.6g} -> {out}")
    print(f"variable max {variable.max:.6g} -> {out_vb}")

def cmd_infer_home(args):
    p = _pipeline(args)
    p.write_home_estimates()
    print(f"{p.counts['homes_determined']} determined, {p.counts['homes_undetermined']} undetermined "
          f"-> {p.out_dir / 'home_estimates.csv'}")

def cmd_hotspot(args):
    p = _pipeline(args)
    p.write_hotspots()
    _, raw, rate = p.hotspots()
    hot = [r.region_id for r in rate if r.classification.startswith("hot")]
    print(f"per-capita hotspots: {', '.join(hot) or 'none'}")

def cmd_temporal(args):
    p = _pipeline(args)
    p.write_temporal()
    print(f"{p.counts['histogram_total']} records binned -> {p.out_dir / 'temporal.csv'}")

def cmd_flows(args):
    p = _pipeline(args)
    p.write_flows()
    for t in p.flow_tables():
        ranks = t.ranks()
        top = sorted(t.rows, key=lambda o: (ranks[o], o))[:3]
        print(f"{t.destination_region_id}: " + ", ".join(f"{o} {100 * t.rows[o].share:.1f}%" for o in top))

def cmd_compare_flows(args):
    if args.event is not None:
        baseline = flows.read_flow_csv(args.baseline)
        event = flows.read_flow_csv(args.event)
        out_dir = Path(args.out_dir or ".")
    else:
        p = _pipeline(args)
        baseline = flows.read_flow_csv(args.baseline)
        event = {t.destination_region_id: t for t in p.flow_tables()}
        out_dir = p.out_dir
    dests = [args.destination] if args.destination else sorted(set(baseline) & set(event))
    if not dests:
        raise DataError("the two flow files share no destination")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "flow_comparison.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("destination,origin,share_baseline,share_event,share_delta,rank_baseline,rank_event\n")
        for d in dests:
            if d not in baseline or d not in event:
                raise DataError(f"destination {d!r} missing from one of the flow files")
            rows = flows.compare_flows(baseline[d], event[d], args.top_k)
            for r in rows:
                fh.write(f"{d},{r.origin},{r.share_baseline!r},{r.share_event!r},{r.share_delta!r},"
                         f"{r.rank_baseline},{r.rank_event}\n")
            if not args.no_figures:
                fig_dir = out_dir / "figures"
                fig_dir.mkdir(exist_ok=True)
                report.plot_comparison(rows, d, fig_dir / f"comparison_{d}.png")
    print(f"compared {len(dests)} destination(s) -> {out_dir / 'flow_comparison.csv'}")

def cmd_validate_profiles(args):
    p = _pipeline(args)
    if p.cfg.profiles is None:
        raise ConfigError("validate-profiles needs a 'profiles' file in the config")
    p.write_profiles()
    _, rate = p.profile_matches()
    print("agreement rate: " + ("no comparable users" if rate is None else f"{rate:.3f}"))

def cmd_run(args):
    p = _pipeline(args)
    manifest = p.run()
    counts = manifest["counts"]
    for key in ("records_read", "event_records", "event_users", "homes_determined", "flow_destinations"):
        if key in counts:
            print(f"{key}: {counts[key]}")
    print(f"outputs in {p.out_dir}")

# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value pipeline config file")
    common.add_argument("--out-dir", help="output directory (overrides out_dir)")
    common.add_argument("--threads", type=int, help="worker threads for per-user stages")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    keys = "\n".join(f"  {k:<16} {v}" for k, v in PIPELINE_KEYS.items())
    parser = argparse.ArgumentParser(
        prog="eventflow",
        description="Movement flows around a large event from georeferenced social records.",
        epilog="config keys:\n" + keys,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic record store and ground truth")
    sp.add_argument("spec", help="key=value scenario file")
    sp = add("example-inputs", cmd_example_inputs, "write the standard demo regions, scenario and config")
    sp.add_argument("directory")
    sp.add_argument("--cohort-size", type=int, default=500)
    add("filter", cmd_filter, "filter event records")
    add("users", cmd_users, "select users who posted inside the corridor")
    add("histories", cmd_histories, "fetch capped per-user histories")
    add("stats", cmd_stats, "history statistics per user and in aggregate")
    sp = add("surface", cmd_surface, "fixed and variable bandwidth surfaces for one user (.asc)")
    sp.add_argument("--user", required=True)
    add("infer-home", cmd_infer_home, "infer home regions")
    add("hotspot", cmd_hotspot, "Gi* hotspots on raw and per-capita counts")
    add("temporal", cmd_temporal, "local-time hourly histogram inside/outside the corridor")
    add("flows", cmd_flows, "population-calibrated origin shares per destination")
    sp = add("compare-flows", cmd_compare_flows, "compare baseline and event flow tables")
    sp.add_argument("--baseline", required=True, help="baseline flows.csv")
    sp.add_argument("--event", help="event flows.csv (default: compute from --config)")
    sp.add_argument("--destination")
    sp.add_argument("--top-k", type=int, default=10)
    sp.add_argument("--no-figures", action="store_true")
    add("validate-profiles", cmd_validate_profiles, "compare profile locations with inferred homes")
    add("run", cmd_run, "run every stage and write a manifest")
    return parser

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (EventFlowError, OSError) as exc:
        code = _exit_code(exc)
        stage = f"[{exc.stage}] " if isinstance(exc, StageError) else ""
        cause = exc.cause if isinstance(exc, StageError) else exc
        print(f"error: {stage}{cause}", file=sys.stderr)
        return code
    return EXIT_OK

if __name__ == "__main__":
    sys.exit(main())
