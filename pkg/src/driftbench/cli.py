"""driftbench command line: gen, collect, acd gen/eval, train, eval, bench, plot.

Data goes to stdout as CSV; diagnostics go to stderr. Exit codes: 0 ok,
1 usage, 2 I/O or file format, 3 numeric failure, 4 generation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import fmt
from .errors import DriftbenchError, FormatError, InvalidInputError

log = logging.getLogger("driftbench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _f6(x: float) -> str:
    return f"{x:.6f}"


def _emit_csv(header, rows) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    sys.stdout.flush()


# -- subcommands --------------------------------------------------------------

def cmd_gen(args, cfg):
    from .procgen import generate
    from .sim import save_world

    seed = _seed(args, cfg)
    world = generate(args.env, seed, cfg.env_params().get(args.env))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_world(world, out)
    _emit_csv(["env", "seed", "obstacles", "file"], [[args.env, seed, len(world.obstacles), str(out)]])


def cmd_collect(args, cfg):
    from .datakit import CollectOptions, collect

    _fold(cfg, "collect", flights=args.flights, kinds=args.kinds, noise_amplitude=args.noise)
    c = cfg["collect"]
    flights, noise = c.flights, c.noise_amplitude
    kinds = [k for k in c.kinds.split(",") if k]
    opts = CollectOptions(cfg["expert"], cfg["camera"], c.dt, c.max_steps, noise, c.noise_hold, cfg.env_params())
    out = Path(args.out) if args.out else _root(args) / "dataset"
    summary = collect(flights, kinds, None, _seed(args, cfg), out if flights else None, opts, _jobs(args, cfg))
    if flights:
        cfg.write_resolved(out)
    _emit_csv(["kind", "index", "dir", "termination", "distance", "steps"],
              [[e["kind"], e["index"], e["dir"], e["termination"], _f6(e["distance"]), e["steps"]] for e in summary.episodes])
    for kind, n in summary.success.items():
        log.info("%s: %d/%d successful", kind, n, flights)


def cmd_acd_gen(args, cfg):
    from .datakit import gen_almost_collision

    _fold(cfg, "acd", trajectories=args.trajectories)
    n = cfg["acd"].trajectories
    out = Path(args.out) if args.out else _root(args) / "acd"
    acd = gen_almost_collision(_seed(args, cfg), n, out, cfg["expert"], cfg["camera"])
    cfg.write_resolved(out)
    _emit_csv(["index", "location_id", "location", "cue", "label", "frames"],
              [[t.index, t.location_id, t.location, t.cue, t.label, len(t.frames)] for t in acd.trajectories])
    log.info("%d trajectories, %d frames", len(acd.trajectories), acd.total_frames)


def _load_training_data(path, arch, cfg, limit=None):
    from .datakit import load_demonstrations

    data = load_demonstrations(path, with_depth=(arch == "auxd"), limit_per_kind=limit or None)
    if not data.frames:
        raise FormatError(f"no episodes found under {path}")
    return data


def cmd_train(args, cfg):
    from .policy import bc_train, build, save_policy

    seed = _seed(args, cfg)
    _fold(cfg, "policy", arch=args.arch)
    _fold(cfg, "train", seed=seed, epochs=args.epochs, sample_stride=args.stride)
    spec, hyper = cfg["policy"], cfg["train"]
    data = _load_training_data(Path(args.data) if args.data else _root(args) / "dataset", spec.arch, cfg)
    model = build(spec, seed)
    model, report = bc_train(model, data, hyper)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_policy(model, out)
    # Wall times go to the log only so that reruns stay byte-identical.
    d = report.to_dict()
    d.pop("wall_time")
    # NAUX has no depth loss and zero epochs leave no final loss; both are written as null.
    d = {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in d.items()}
    for e in d["epochs"]:
        log.info("epoch %d took %.1f s", e["epoch"], e.pop("wall_time"))
    Path(str(out) + ".report.json").write_text(fmt.dumps(d), encoding="utf-8")
    cfg.write_resolved(out.parent)
    rows = [[e["epoch"], _f6(e["control_loss"]), _f6(e["depth_loss"]) if "depth_loss" in e else ""] for e in d["epochs"]]
    _emit_csv(["epoch", "control_loss", "depth_loss"], rows)


def _load_policy_arg(spec: str):
    if spec == "expert":
        return "expert"
    from .policy import load_policy

    try:
        return load_policy(spec)
    except OSError as e:
        raise FormatError(f"cannot read model {spec}: {e.strerror}") from None


def cmd_eval(args, cfg):
    from .bench import OnlineEvalConfig, eval_online

    policy = _load_policy_arg(args.model)
    _fold(cfg, "eval", runs=args.runs)
    runs = cfg["eval"].runs
    ec = OnlineEvalConfig(args.env, runs, _seed(args, cfg), cfg["eval"].max_steps, env_params=cfg.env_params())
    res = eval_online(policy, ec)
    rows = [[r.index, "" if r.seed is None else r.seed, r.direction, _f6(r.distance), r.termination, r.steps] for r in res.runs]
    rows.append(["mean", "", "", _f6(res.mean_distance), "", ""])
    _emit_csv(["run", "seed", "direction", "distance", "termination", "steps"], rows)


def cmd_acd_eval(args, cfg):
    from .bench import classify_eval, expert_predictor, model_predictor
    from .datakit import load_acd

    acd = load_acd(Path(args.data) if args.data else _root(args) / "acd")
    policy = _load_policy_arg(args.model)
    pred = expert_predictor(cfg["expert"], cfg["camera"]) if policy == "expert" else model_predictor(policy)
    res = classify_eval(pred, acd)
    rows = [["location", k, _f6(v)] for k, v in res.per_location.items()]
    rows.append(["average", "location", _f6(res.location_avg)])
    rows += [["cue", k, _f6(v)] for k, v in res.per_cue.items()]
    rows.append(["average", "cue", _f6(res.cue_avg)])
    rows.append(["per-frame", "all", _f6(res.per_frame_accuracy)])
    _emit_csv(["group", "name", "accuracy"], rows)


def cmd_bench(args, cfg):
    from .bench import PopulationConfig, run_population
    from .datakit import load_acd
    from .report import emit_report

    _fold(cfg, "bench", archs=args.arch, population=args.population)
    _fold(cfg, "eval", runs=args.runs)
    _fold(cfg, "train", epochs=args.epochs, sample_stride=args.stride)
    b = cfg["bench"]
    archs = [a.strip().lower() for a in b.archs.split(",") if a.strip()]
    for a in archs:
        if a not in ("naux", "auxd"):
            raise InvalidInputError(f"unknown architecture {a!r}")
    n, runs, hyper = b.population, cfg["eval"].runs, cfg["train"]
    out = Path(args.out)
    data_dir = Path(args.data) if args.data else _root(args) / "dataset"
    data = _load_training_data(data_dir, "auxd" if "auxd" in archs else "naux", cfg, b.flights_per_kind)
    acd = load_acd(args.acd) if args.acd else None
    pcfg = PopulationConfig(n, _seed(args, cfg), runs, max_steps=cfg["eval"].max_steps, env_params=cfg.env_params())
    spec = {k: v for k, v in cfg["policy"].to_dict().items() if k != "arch"}
    pops = []
    for arch in archs:
        log.info("training and scoring %d %s policies", n, arch)
        pop = run_population(arch, data, hyper, pcfg, spec, acd, out / "models", _jobs(args, cfg))
        if pop.aborted:
            log.warning("%s: %d of %d policies aborted in training", arch, pop.aborted, n)
        pops.append(pop)
    emit_report(pops, out)
    cfg.write_resolved(out)
    sys.stdout.write((out / "population.csv").read_text(encoding="utf-8"))


def cmd_plot(args, cfg):
    from .report import curve_svg, parse_population_csv

    src = Path(args.input) / "population.csv"
    try:
        rows = parse_population_csv(src.read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(f"cannot read {src}: {e.strerror}") from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(curve_svg(rows), encoding="utf-8")
    _emit_csv(["file", "policies"], [[str(out), len(rows)]])


# -- wiring ---------------------------------------------------------------------

def _fold(cfg, section: str, **values) -> None:
    """Copy explicitly given flags into the config so config.resolved records them."""
    for key, value in values.items():
        if value is not None:
            cfg.set(section, key, value)


def _root(args) -> Path:
    from .config import data_root

    return Path(args.data_root) if args.data_root else data_root()


def _seed(args, cfg) -> int:
    _fold(cfg, "run", master_seed=args.seed)
    return cfg["run"].master_seed


def _jobs(args, cfg) -> int:
    return cfg["run"].jobs if args.jobs is None else args.jobs


def _common(p: argparse.ArgumentParser, seed_help: str = "master seed (default: run.master_seed = 0)"):
    p.add_argument("--config", metavar="FILE", default=None, help="TOML run configuration (default: built-in defaults)")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                   help="override a config value, e.g. train.epochs=2; repeatable (default: none)")
    p.add_argument("--seed", type=int, default=None, help=seed_help)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: run.jobs = 1)")
    p.add_argument("--data-root", default=None,
                   help="default data directory (default: $DRIFTBENCH_DATA, else ./data)")
    p.add_argument("-v", "--verbose", action="store_true", default=False, help="log progress to stderr (default: off)")


def build_parser() -> argparse.ArgumentParser:
    fmt_cls = argparse.HelpFormatter
    parser = _Parser(prog="driftbench", description="Imitation-learning drone avoidance benchmark.", formatter_class=fmt_cls)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate one world as JSON", formatter_class=fmt_cls)
    p.add_argument("--env", required=True, choices=["canyon", "forest", "sandbox", "corridor"], help="world family (required)")
    p.add_argument("--out", required=True, metavar="FILE", help="output world JSON (required)")
    _common(p, "world seed (default: run.master_seed = 0)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("collect", help="fly the expert and record a dataset", formatter_class=fmt_cls)
    p.add_argument("--flights", type=int, default=None, help="flights per kind (default: collect.flights = 100)")
    p.add_argument("--kinds", default=None, help="comma list of kinds (default: collect.kinds = canyon,forest,sandbox)")
    p.add_argument("--noise", type=float, default=None, help="applied-action noise amplitude (default: collect.noise_amplitude = 0)")
    p.add_argument("--out", default=None, metavar="DIR", help="dataset directory (default: <data-root>/dataset)")
    _common(p)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("acd", help="almost-collision set: gen | eval", formatter_class=fmt_cls)
    acd_sub = p.add_subparsers(dest="acd_command", required=True, parser_class=_Parser)
    q = acd_sub.add_parser("gen", help="generate the synthetic almost-collision set", formatter_class=fmt_cls)
    q.add_argument("--trajectories", type=int, default=None, help="trajectory count (default: acd.trajectories = 25)")
    q.add_argument("--out", default=None, metavar="DIR", help="output directory (default: <data-root>/acd)")
    _common(q)
    q.set_defaults(func=cmd_acd_gen)
    q = acd_sub.add_parser("eval", help="classification accuracy of a model", formatter_class=fmt_cls)
    q.add_argument("--model", required=True, help="DSHC model file, or 'expert' (required)")
    q.add_argument("--data", default=None, metavar="DIR", help="almost-collision directory (default: <data-root>/acd)")
    _common(q)
    q.set_defaults(func=cmd_acd_eval)

    p = sub.add_parser("train", help="behavioral cloning of one policy", formatter_class=fmt_cls)
    p.add_argument("--arch", required=True, choices=["naux", "auxd"], help="architecture (required)")
    p.add_argument("--data", default=None, metavar="DIR", help="dataset directory (default: <data-root>/dataset)")
    p.add_argument("--out", required=True, metavar="MODEL", help="output DSHC model; the report goes to MODEL.report.json (required)")
    p.add_argument("--epochs", type=int, default=None, help="epochs (default: train.epochs = 20)")
    p.add_argument("--stride", type=int, default=None, help="use every n-th sample (default: train.sample_stride = 1)")
    _common(p, "training seed: init and shuffling (default: run.master_seed = 0)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="online distance over seeded runs", formatter_class=fmt_cls)
    p.add_argument("--model", required=True, help="DSHC model file, or 'expert' (required)")
    p.add_argument("--env", required=True, choices=["canyon", "forest", "sandbox", "corridor"], help="world family (required)")
    p.add_argument("--runs", type=int, default=None, help="runs (default: eval.runs = 10)")
    _common(p, "evaluation master seed (default: run.master_seed = 0)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="population training, ranking and reports", formatter_class=fmt_cls)
    p.add_argument("--arch", default=None, help="comma list (default: bench.archs = naux,auxd)")
    p.add_argument("--population", type=int, default=None, help="policies per arch (default: bench.population = 10)")
    p.add_argument("--data", default=None, metavar="DIR", help="dataset directory (default: <data-root>/dataset)")
    p.add_argument("--acd", default=None, metavar="DIR", help="almost-collision directory to score every policy on (default: not scored)")
    p.add_argument("--runs", type=int, default=None, help="online runs per kind (default: eval.runs = 10)")
    p.add_argument("--epochs", type=int, default=None, help="epochs (default: train.epochs = 20)")
    p.add_argument("--stride", type=int, default=None, help="use every n-th sample (default: train.sample_stride = 1)")
    p.add_argument("--out", required=True, metavar="DIR", help="report directory (required)")
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="percentile curve from a bench directory", formatter_class=fmt_cls)
    p.add_argument("--in", dest="input", required=True, metavar="DIR", help="bench output directory (required)")
    p.add_argument("--out", required=True, metavar="FILE", help="output SVG (required)")
    _common(p)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    from .config import RunConfig

    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.overrides)
        args.func(args, cfg)
    except DriftbenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
