"""Command-line interface: full-sweep runner plus standalone pipeline stages.

Every stage reads the previous stage's serialized artifact and writes its
own, so stages are usable on externally supplied files in the documented
formats. `run` executes the whole sweep with caching; `report` re-collates
the result CSVs.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from . import io as bsio
from .agent import MotionConfig, build_agent, star_agent_spec
from .baselines import aggregate, euclidean_prim_baseline, write_report_csvs
from .bodymap import information_metric, mds_embed
from .inference import Hyperparameters, run_chain
from .pipeline import ExperimentConfig, preset, run_pipeline, write_summary
from .simulate import quantize, simulate


def _load_agent(path: str | None):
    if path is None:
        return build_agent(star_agent_spec())
    return build_agent(path)


def _cmd_simulate(args) -> None:
    agent = _load_agent(args.agent)
    cfg = MotionConfig(p_coordination=args.p_coordination, seed=args.seed,
                       dt=args.dt, total_steps=args.steps,
                       decision_interval=args.interval,
                       controller_gain=args.gain, rho=args.rho)
    log = simulate(agent, cfg)
    bsio.save_tactile(log, args.out)
    print(f"wrote {args.out}: M={log.n_sensors} T={log.n_steps}")


def _cmd_quantize(args) -> None:
    log = bsio.load_tactile(args.input)
    qlog = quantize(log, args.n_levels)
    bsio.save_tactile(qlog, args.out)
    print(f"wrote {args.out}: N={args.n_levels}")


def _cmd_metric(args) -> None:
    log = bsio.load_tactile(args.input)
    dist = information_metric(log, stride=args.stride)
    if args.csv:
        bsio.distance_to_csv(dist, args.out)
    else:
        bsio.save_distance(dist, args.out)
    print(f"wrote {args.out}: M={dist.n_sensors}")


def _cmd_embed(args) -> None:
    dist = (bsio.distance_from_csv(args.input) if args.input.endswith(".csv")
            else bsio.load_distance(args.input))
    bmap = mds_embed(dist, args.dim)
    if args.csv:
        bsio.bodymap_to_csv(bmap, args.out)
    else:
        bsio.save_bodymap(bmap, args.out)
    print(f"wrote {args.out}: n={bmap.n_points} d={bmap.dim}")


def _cmd_infer(args) -> None:
    bmap = bsio.load_bodymap(args.input)
    hp = Hyperparameters.from_data(bmap.points, k_max=args.k_max,
                                   gamma=args.gamma, k0=args.k0)
    for chain in range(args.chains):
        seed = args.seed + chain
        samples = run_chain(bmap, hp, args.iterations, args.burn_in, seed,
                            mode=args.mode, activation_min=args.activation_min)
        path = args.out if args.chains == 1 else _numbered(args.out, chain)
        bsio.save_chain(samples, path, mode=args.mode, seed=seed,
                        meta={"d": bmap.dim, "p_coordination": args.p_coordination,
                              "chain": chain})
        print(f"wrote {path}: {len(samples)} samples")


def _numbered(path: str, k: int) -> str:
    base, ext = os.path.splitext(path)
    return f"{base}_{k}{ext}"


def _cmd_evaluate(args) -> None:
    agent = _load_agent(args.agent)
    truth_labels = agent.sensor_part_labels()
    truth_edges = agent.ground_truth_edges()
    reports = []
    for path in args.chains:
        header, samples = bsio.load_chain(path)
        meta = header.get("meta", {})
        d = int(meta.get("d", samples[0].state.mu.shape[1]))
        p = float(meta.get("p_coordination") or float("nan"))
        seed = int(header.get("seed", 0))
        if header["mode"] == "dpgmm_lj":
            reports.append(aggregate(samples, truth_edges, truth_labels,
                                     method="dpgmm_lj", d=d, p_coordination=p,
                                     seed=seed,
                                     activation_min=args.activation_min))
        else:
            reports.append(aggregate(samples, truth_edges, truth_labels,
                                     method="dpgmm", d=d, p_coordination=p,
                                     seed=seed, activation_min=args.activation_min,
                                     estimates_trees=False))
            reports.append(aggregate(
                samples, truth_edges, truth_labels, method="dpgmm_prim", d=d,
                p_coordination=p, seed=seed, activation_min=args.activation_min,
                trees=euclidean_prim_baseline(samples, args.activation_min)))
    paths = write_report_csvs(reports, args.out)
    write_summary(args.out)
    for name, path in paths.items():
        print(f"wrote {path}")


def _cmd_report(args) -> None:
    path = write_summary(args.out)
    print(f"wrote {path}")


def _cmd_run(args) -> None:
    if args.config:
        cfg = ExperimentConfig.from_yaml(args.config, out_dir=args.out)
    elif args.preset:
        cfg = preset(args.preset, args.out)
    else:
        raise SystemExit("run requires --config or --preset")
    if args.dim:
        cfg.dims = args.dim
    if args.p_coordination is not None:
        cfg.p_values = args.p_coordination
    if args.n_levels:
        cfg.n_levels = args.n_levels
    if args.seed is not None:
        cfg.seeds = [args.seed]
    manifest = run_pipeline(cfg, jobs=args.jobs)
    print(f"{manifest['n_reports']} reports -> {cfg.out_dir}")
    if manifest["errors"]:
        print(f"{len(manifest['errors'])} combination(s) failed; see manifest.json",
              file=sys.stderr)


def _cmd_agent(args) -> None:
    with open(args.out, "w") as fh:
        yaml.safe_dump(star_agent_spec(args.sensors), fh, sort_keys=False)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bodyschema",
                                description="Body-schema estimation pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run the agent and record tactile pressures")
    sp.add_argument("--agent", help="agent spec YAML (default: built-in 5-part star)")
    sp.add_argument("--p-coordination", type=float, required=True)
    sp.add_argument("--steps", type=int, default=100_000)
    sp.add_argument("--dt", type=float, default=0.1)
    sp.add_argument("--interval", type=int, default=500)
    sp.add_argument("--gain", type=float, default=1.0)
    sp.add_argument("--rho", type=float, default=1010.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("quantize", help="equal-frequency quantization of a log")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--n-levels", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_quantize)

    sp = sub.add_parser("metric", help="pairwise information distance matrix")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--csv", action="store_true", help="write CSV instead of binary")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_metric)

    sp = sub.add_parser("embed", help="classical MDS body map")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--csv", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_embed)

    sp = sub.add_parser("infer", help="Gibbs chains on a body map")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--mode", choices=["dpgmm_lj", "dpgmm"], default="dpgmm_lj")
    sp.add_argument("--iterations", type=int, default=1000)
    sp.add_argument("--burn-in", type=int, default=500)
    sp.add_argument("--chains", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--k0", type=float, default=0.01)
    sp.add_argument("--k-max", type=int, default=10)
    sp.add_argument("--activation-min", type=int, default=2)
    sp.add_argument("--p-coordination", type=float, default=None,
                    help="recorded as metadata only")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_infer)

    sp = sub.add_parser("evaluate", help="score chain dumps against the agent truth")
    sp.add_argument("--chains", nargs="+", required=True)
    sp.add_argument("--agent", help="agent spec YAML (default: built-in star)")
    sp.add_argument("--activation-min", type=int, default=2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_evaluate)

    sp = sub.add_parser("report", help="re-collate result CSVs into summary.csv")
    sp.add_argument("--out", required=True, help="directory holding the CSVs")
    sp.set_defaults(func=_cmd_report)

    sp = sub.add_parser("run", help="full sweep from a config file or preset")
    sp.add_argument("--config", help="experiment config YAML")
    sp.add_argument("--preset", choices=["experiment1", "experiment2", "desk"])
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--dim", type=int, nargs="+", default=None)
    sp.add_argument("--p-coordination", type=float, nargs="+", default=None)
    sp.add_argument("--n-levels", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("agent", help="write the default star agent spec to YAML")
    sp.add_argument("--sensors", type=int, default=840)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_agent)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
