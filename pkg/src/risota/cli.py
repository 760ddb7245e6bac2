"""Command-line entry point: ``python -m risota <command>``.

Commands
--------
run           one experiment with its metrics and diagnostics files
sweep-n       reruns the experiment over RIS sizes and seeds
phase-bench   standalone benchmark of the phase solver on random instances
channel-dump  writes raw channel draws for a few rounds as CSV
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

import numpy as np

from . import __version__, io
from .channel import build_topology, draw_round_channels, path_loss_table
from .config import VARIANTS, ConfigError, ExperimentConfig, load_config
from .phase import ScaConfig, ScaProblem, sca_solve
from .rng import complex_normal, stream

log = logging.getLogger("risota")


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "variant", None):
        changes["variant"] = args.variant
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        changes["learning.rounds"] = args.rounds
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def _progress(every):
    def cb(rec):
        if every and (rec.round + 1) % every == 0:
            log.info("round %d  acc %.4f  loss %.4f", rec.round + 1, rec.test_acc, rec.train_loss)
    return cb


def cmd_run(args) -> int:
    from .simulation import Experiment

    cfg = _load(args)
    out = io.output_dir(cfg, args.output_dir)
    paths = io.output_paths(cfg, out)
    exp = Experiment(cfg)  # dataset problems surface here, before any output
    io.write_manifest(cfg, paths, paths["manifest"])
    result = exp.run(callback=_progress(args.log_every))
    io.write_run_outputs(result, paths)
    print(f"final test accuracy {result.final_accuracy:.4f} after {len(result.records)} rounds")
    print(f"outputs in {out}")
    return 0


def cmd_sweep(args) -> int:
    from .simulation import load_datasets, run_experiment

    cfg = _load(args)
    out = io.output_dir(cfg, args.output_dir)
    seeds = args.seeds or [cfg.seed]
    datasets = load_datasets(cfg)
    summary = []
    for n in args.n:
        for s in seeds:
            sub = cfg.replace(**{"topology.n_elements": n, "seed": s})
            paths = io.output_paths(sub, out / f"N{n}" / f"seed{s}")
            io.write_manifest(sub, paths, paths["manifest"])
            res = run_experiment(sub, datasets)
            io.write_run_outputs(res, paths)
            summary.append((n, s, res.final_accuracy, res.diagnostics["C"]))
            log.info("N=%d seed=%d acc %.4f", n, s, res.final_accuracy)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n_elements", "seed", "final_acc", "C"))
        for n, s, acc, c in summary:
            w.writerow((n, s, io._fmt(acc), io._fmt(c)))
    print("n_elements  mean_final_acc  C")
    for n in args.n:
        rows = [r for r in summary if r[0] == n]
        print(f"{n:10d}  {np.mean([r[2] for r in rows]):14.4f}  {np.mean([r[3] for r in rows]):.4g}")
    return 0


def cmd_bench(args) -> int:
    cfg = ScaConfig(max_iters=args.iters)
    rng = stream(args.seed, "bench")
    iters, gains, monotone = [], [], 0
    start = time.perf_counter()
    for _ in range(args.instances):
        g = complex_normal(rng, args.n, 2.0)
        s = complex(complex_normal(rng, (), 2.0 * args.n))
        res = sca_solve(ScaProblem(g, s), cfg, rng.uniform(0, 2 * np.pi, args.n))
        obj = np.asarray(res.objectives)
        iters.append(res.n_iter)
        gains.append(obj[-1] / obj[0] if obj[0] > 0 else 1.0)
        monotone += bool(np.all(np.diff(obj) <= 1e-9))
    elapsed = time.perf_counter() - start
    print(f"N={args.n} instances={args.instances} J={args.iters}")
    print(f"mean iterations        {np.mean(iters):.1f}")
    print(f"median final/initial   {np.median(gains):.4g}")
    print(f"monotone instances     {monotone}/{args.instances}")
    print(f"time per solve         {1e3 * elapsed / args.instances:.3f} ms")
    return 0 if monotone == args.instances else 1


def cmd_channels(args) -> int:
    cfg = _load(args)
    topo_seed = cfg.seed if cfg.topology_seed is None else cfg.topology_seed
    table = path_loss_table(build_topology(cfg.topology, stream(topo_seed, "topology")),
                            cfg.channel)
    out = io.output_dir(cfg, args.output_dir) / "channels.csv"
    draws = (draw_round_channels(table, cfg.seed, t) for t in range(args.rounds))
    io.write_channel_dump(draws, out)
    print(f"wrote {args.rounds} rounds to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risota", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="JSON config; omitted means all defaults")
        sp.add_argument("--output-dir", help=f"overrides ${io.OUTPUT_ENV} and output.directory")
        if seed:
            sp.add_argument("--seed", type=int)

    r = sub.add_parser("run", help="run one experiment")
    common(r)
    r.add_argument("--variant", choices=VARIANTS)
    r.add_argument("--rounds", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--log-every", type=int, default=50)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-n", help="sweep the number of RIS elements")
    common(s)
    s.add_argument("--n", type=_int_list, required=True, help="e.g. 15,45,75")
    s.add_argument("--seeds", type=_int_list, help="e.g. 0,1,2 (default: config seed)")
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--rounds", type=int)
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("phase-bench", help="benchmark the phase solver")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--instances", type=int, default=100)
    b.add_argument("--iters", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("channel-dump", help="dump raw channel draws")
    common(c)
    c.add_argument("--rounds", type=int, required=True)
    c.set_defaults(func=cmd_channels)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    for name in ("n", "instances", "rounds"):
        v = getattr(args, name, None)
        if isinstance(v, int) and v < 1:
            print(f"error: --{name} must be >= 1", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
