"""Command-line pipeline: collect rollouts, train the trackability network,
dump heatmaps, and evaluate policies.

Exit codes: 0 ok, 2 I/O failure, 3 empty dataset, 4 shape mismatch,
5 missing artifact.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import geodesic, nn, trackability
from .core import load_rollouts, save_rollouts
from .experiment import (EVAL_MODES, build_terminal_field, load_config,
                         make_env, run_collect, run_eval, run_train)

EXIT_OK = 0
EXIT_IO = 2
EXIT_EMPTY = 3
EXIT_SHAPE = 4
EXIT_MISSING = 5


def _common(parser):
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--env", choices=["darkzone", "arm"], help="environment")
    parser.add_argument("--seed", type=int, help="root seed override")
    parser.add_argument("--out", required=True, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="filteraware",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="roll out the unconstrained MPC policy")
    _common(p)
    p.add_argument("--n", type=int, help="number of rollouts")
    p.add_argument("--len", type=int, dest="length", help="steps per rollout")

    p = sub.add_parser("train", help="train the trackability network")
    p.add_argument("dataset", help="JSON-lines rollout file from 'collect'")
    _common(p)

    p = sub.add_parser("heatmap", help="evaluate a trained network on a grid")
    p.add_argument("weights", help="weights JSON from 'train'")
    p.add_argument("--res", type=int, default=100, help="grid resolution")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--env", choices=["darkzone", "arm"])
    p.add_argument("--seed", type=int)

    p = sub.add_parser("eval", help="run a closed-loop evaluation")
    p.add_argument("weights", nargs="?", help="weights JSON (required for filteraware)")
    _common(p)
    p.add_argument("--mode", choices=list(EVAL_MODES), default="vanilla")
    p.add_argument("--n", type=int, help="number of rollouts")
    p.add_argument("--len", type=int, dest="length", help="steps per rollout")
    return parser


def _write_guard(fn, path) -> int:
    try:
        fn()
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = load_config(args.config, env_name=args.env, seed=args.seed)
    n = cfg.collect_n if args.n is None else args.n
    if n == 0:
        print("warning: n=0, writing an empty dataset", file=sys.stderr)
        return _write_guard(lambda: save_rollouts(args.out, []), args.out)
    rollouts = run_collect(cfg, n=n, length=args.length)
    code = _write_guard(lambda: save_rollouts(args.out, rollouts), args.out)
    if code == EXIT_OK:
        mean_err = float(np.mean([np.mean(r.errors) for r in rollouts]))
        print(f"collected {len(rollouts)} rollouts, mean tracking error {mean_err:.6g}")
    return code


def cmd_train(args) -> int:
    cfg = load_config(args.config, env_name=args.env, seed=args.seed)
    try:
        rollouts = load_rollouts(args.dataset)
    except OSError as exc:
        print(f"error: cannot read {args.dataset}: {exc}", file=sys.stderr)
        return EXIT_IO
    chunks = trackability.chunk_rollouts(rollouts, cfg.track.chunk_len,
                                         cfg.track.accept_error_max)
    if not chunks:
        print("error: dataset is empty after chunking", file=sys.stderr)
        return EXIT_EMPTY
    net, metadata, final_loss = run_train(cfg, rollouts)
    code = _write_guard(lambda: nn.save_mlp(args.out, net, metadata), args.out)
    if code == EXIT_OK:
        print(f"trained on {len(chunks)} chunks, final loss {final_loss:.6g}")
    return code


def cmd_heatmap(args) -> int:
    try:
        net, metadata = nn.load_mlp(args.weights)
    except OSError as exc:
        print(f"error: cannot read {args.weights}: {exc}", file=sys.stderr)
        return EXIT_MISSING
    env_name = args.env or metadata.get("env", "darkzone")
    cfg = load_config(args.config, env_name=env_name, seed=args.seed)
    env = make_env(cfg, "vanilla")
    feat_dim = env.trackability_features(env.grid_states(2)).shape[-1]
    if net.input_dim != feat_dim:
        print(f"error: network input dim {net.input_dim} does not match "
              f"{env_name} feature dim {feat_dim}", file=sys.stderr)
        return EXIT_SHAPE
    grid = trackability.heatmap(net, env, args.res)
    field = geodesic.DistanceField(values=grid, cell_size=1.0 / args.res)

    def write():
        geodesic.save_field_csv(field, args.out)

    code = _write_guard(write, args.out)
    if code == EXIT_OK:
        print(f"wrote {args.res}x{args.res} grid to {args.out}")
    return code


def cmd_eval(args) -> int:
    cfg = load_config(args.config, env_name=args.env, seed=args.seed)
    weights_path = args.weights or cfg.weights_path
    net = None
    if args.mode == "filteraware":
        if not weights_path:
            print("error: filteraware mode requires a weights file", file=sys.stderr)
            return EXIT_MISSING
        try:
            net, _ = nn.load_mlp(weights_path)
        except OSError as exc:
            print(f"error: cannot read {weights_path}: {exc}", file=sys.stderr)
            return EXIT_MISSING
    report = run_eval(cfg, args.mode, net=net, n=args.n, length=args.length)
    code = _write_guard(lambda: report.save_json(args.out), args.out)
    if code == EXIT_OK:
        print(f"mode={report.mode} n={report.n_rollouts} "
              f"success_rate={report.success_rate:.3f} "
              f"mean_tracking_error={report.mean_tracking_error:.6g} "
              f"mean_total_cost={report.mean_total_cost:.6g} "
              f"planner_hz={report.planner_hz:.1f}")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "collect": cmd_collect,
        "train": cmd_train,
        "heatmap": cmd_heatmap,
        "eval": cmd_eval,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
