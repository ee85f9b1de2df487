"""Command-line interface: generate / train / evaluate / baseline.

Exit codes: 0 on success, 2 on validation errors (bad flags, malformed
files, unattainable ranks), 3 on numerical failures (trajectory blow-up,
failed line search, singular pairing).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .baselines import bt_init_for, pod, state_snapshots
from .errors import (
    BlowUp,
    DegenerateDenominator,
    LineSearchFailed,
    NonFiniteState,
    SingularPairing,
    TroopError,
)
from .objective import (
    ObjectiveConfig,
    Trajectory,
    TrajectoryDataset,
    load_dataset,
    save_dataset,
)
from .optimizer import CgConfig, optimize
from .projection import assemble_rom, load_checkpoint, save_checkpoint
from .system import load_model, sample_observations, toy_model

__all__ = ["main"]


def _load_system(spec: str):
    if spec == "toy":
        return toy_model()
    return load_model(spec)


def _parse_amplitudes(spec: str, seed: int) -> np.ndarray:
    """Either an explicit comma list or "random:<count>:<lo>,<hi>"."""
    if spec.startswith("random:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"malformed random amplitude spec {spec!r}")
        count = int(parts[1])
        lo, hi = (float(v) for v in parts[2].split(","))
        rng = np.random.default_rng(seed)
        return rng.uniform(lo, hi, size=count)
    return np.asarray([float(v) for v in spec.split(",")], dtype=float)


def _parse_input_signal(spec: str | None, d: int):
    """Input signal flag: currently "sin:<amplitude>:<omega>"."""
    if spec is None:
        return None
    parts = spec.split(":")
    if parts[0] != "sin" or len(parts) != 3:
        raise ValueError(f"unknown input signal {spec!r}")
    amp, omega = float(parts[1]), float(parts[2])
    ones = np.ones(d)
    return lambda t: amp * np.sin(omega * t) * ones


def _write_manifest(out_path: str, command: str, config: dict, inputs, outputs, wall: float, seed):
    doc = {
        "command": command,
        "config": config,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "wall_clock_seconds": wall,
        "seed": seed,
    }
    with open(str(out_path) + ".manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2)


def cmd_generate(args) -> int:
    start = time.perf_counter()
    sys_ = _load_system(args.model)
    amps = _parse_amplitudes(args.amplitudes, args.seed)
    if args.samples < 1:
        raise ValueError(f"--samples must be >= 1, got {args.samples}")
    if not args.horizon > 0:
        raise ValueError(f"--horizon must be positive, got {args.horizon}")
    times = np.linspace(0.0, args.horizon, args.samples)
    trajs = []
    for amp in amps:
        x0 = sys_.b @ (amp * np.ones(sys_.d))
        outputs, _ = sample_observations(sys_, x0, times, args.substeps)
        trajs.append(
            Trajectory(
                x0=x0, times=times, observations=outputs, label=f"u0={amp:.10g}"
            )
        )
    save_dataset(TrajectoryDataset(tuple(trajs)), args.out)
    _write_manifest(
        args.out,
        "generate",
        {
            "model": args.model,
            "amplitudes": args.amplitudes,
            "samples": args.samples,
            "horizon": args.horizon,
            "substeps": args.substeps,
        },
        inputs=[] if args.model == "toy" else [args.model],
        outputs=[args.out],
        wall=time.perf_counter() - start,
        seed=args.seed,
    )
    print(f"wrote {len(trajs)} trajectories to {args.out}")
    return 0


def _initial_pair(args, sys_, data):
    if args.init == "bt":
        return bt_init_for(sys_, args.rank)
    if args.init == "pod":
        return pod(state_snapshots(sys_, data, args.substeps), args.rank)
    if args.init.startswith("file:"):
        pair, _ = load_checkpoint(args.init[len("file:"):])
        return pair
    raise ValueError(f"unknown init {args.init!r} (expected bt, pod or file:<path>)")


def cmd_train(args) -> int:
    start = time.perf_counter()
    sys_ = _load_system(args.model)
    data = load_dataset(args.data)
    threads = args.threads or int(os.environ.get("TROOP_THREADS", "1"))
    obj_cfg = ObjectiveConfig(
        gamma=args.gamma,
        quad_order=args.quad_order,
        quad_panels=args.quad_panels,
        substeps=args.substeps,
        threads=threads,
    )
    cg_cfg = CgConfig(
        c1=args.c1,
        c2=args.c2,
        eps=args.tol,
        max_iters=args.max_iters,
        transport_mode=args.transport,
    )
    init = _initial_pair(args, sys_, data)
    trace_path = args.trace or (os.path.splitext(args.out)[0] + ".trace.jsonl")
    try:
        result = optimize(sys_, init, data, obj_cfg=obj_cfg, cg_cfg=cg_cfg)
    except LineSearchFailed as exc:
        if exc.trace:
            _write_trace(trace_path, exc.trace)
        raise
    _write_trace(trace_path, result.trace)
    save_checkpoint(
        args.out,
        result.pair,
        meta={
            "gamma": args.gamma,
            "iterations": result.iterations,
            "final_cost": result.final_cost,
            "final_grad_norm": result.final_grad_norm,
        },
    )
    _write_manifest(
        args.out,
        "train",
        {
            "model": args.model,
            "rank": args.rank,
            "gamma": args.gamma,
            "init": args.init,
            "c1": args.c1,
            "c2": args.c2,
            "tol": args.tol,
            "max_iters": args.max_iters,
            "quad_order": args.quad_order,
            "quad_panels": args.quad_panels,
            "substeps": args.substeps,
            "transport": args.transport,
            "threads": threads,
        },
        inputs=[args.data] + ([] if args.model == "toy" else [args.model]),
        outputs=[args.out, trace_path],
        wall=time.perf_counter() - start,
        seed=args.seed,
    )
    print(
        f"converged={result.converged} iterations={result.iterations} "
        f"cost={result.final_cost:.6e} grad_norm={result.final_grad_norm:.6e}"
    )
    return 0


def _write_trace(path, trace) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec.as_dict()) + "\n")


def _parse_checkpoints(spec: str):
    """Comma list of label=path entries."""
    out = []
    for item in spec.split(","):
        label, _, path = item.partition("=")
        if not path:
            raise ValueError(f"malformed checkpoint entry {item!r}; need label=path")
        out.append((label, path))
    return out


def cmd_evaluate(args) -> int:
    start = time.perf_counter()
    sys_ = _load_system(args.model)
    data = load_dataset(args.data)
    u_fn = _parse_input_signal(args.input, sys_.d)
    entries = _parse_checkpoints(args.checkpoints)
    roms = []
    for label, path in entries:
        pair, _ = load_checkpoint(path)
        roms.append((label, assemble_rom(sys_, pair)))

    m = sys_.m
    y_cols = (
        ["y_true", "y_pred"]
        if m == 1
        else [f"y_true_{i}" for i in range(m)] + [f"y_pred_{i}" for i in range(m)]
    )
    rows = []
    sums: dict[str, list] = {label: [] for label, _ in roms}
    for tr in data:
        if u_fn is None:
            x0 = tr.x0
            y_true = tr.observations
        else:
            # Generalization check: zero initial condition, driven by u(t);
            # ground truth re-simulated from the full model.
            x0 = np.zeros(sys_.n)
            y_true, _ = sample_observations(sys_, x0, tr.times, args.substeps, u_fn)
        energy = float(np.mean(np.sum(y_true**2, axis=1)))
        if not energy > 0.0:
            raise ValueError(f"trajectory {tr.label!r} has zero output energy")
        for label, rom in roms:
            try:
                y_pred, _ = sample_observations(
                    rom, rom.reduce_ic(x0), tr.times, args.substeps, u_fn
                )
            except NonFiniteState:
                y_pred = np.full_like(y_true, np.inf)
            err = np.sum((y_pred - y_true) ** 2, axis=1) / energy
            sums[label].append(float(np.mean(err)))
            for k, t in enumerate(tr.times):
                rows.append(
                    [label, tr.label, float(t)]
                    + [float(v) for v in y_true[k]]
                    + [float(v) for v in y_pred[k]]
                    + [float(err[k])]
                )

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "trajectory", "t"] + y_cols + ["normalized_sq_error"])
        writer.writerows(rows)
    summary_path = str(args.out) + ".summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "mean_normalized_error"])
        for label, _ in roms:
            mean_err = float(np.mean(sums[label]))
            writer.writerow([label, repr(mean_err)])
            print(f"{label}: mean normalized error {mean_err:.6e}")
    _write_manifest(
        args.out,
        "evaluate",
        {
            "model": args.model,
            "checkpoints": args.checkpoints,
            "input": args.input,
            "substeps": args.substeps,
        },
        inputs=[args.data] + [path for _, path in entries],
        outputs=[args.out, summary_path],
        wall=time.perf_counter() - start,
        seed=args.seed,
    )
    return 0


def cmd_baseline(args) -> int:
    start = time.perf_counter()
    sys_ = _load_system(args.model)
    if args.method == "bt":
        pair = bt_init_for(sys_, args.rank)
        inputs = [] if args.model == "toy" else [args.model]
    elif args.method == "pod":
        if not args.data:
            raise ValueError("--data is required for the pod baseline")
        data = load_dataset(args.data)
        pair = pod(state_snapshots(sys_, data, args.substeps), args.rank)
        inputs = [args.data]
    else:
        raise ValueError(f"unknown baseline method {args.method!r}")
    save_checkpoint(args.out, pair, meta={"method": args.method, "rank": args.rank})
    _write_manifest(
        args.out,
        "baseline",
        {"model": args.model, "method": args.method, "rank": args.rank},
        inputs=inputs,
        outputs=[args.out],
        wall=time.perf_counter() - start,
        seed=args.seed,
    )
    print(f"wrote {args.method} checkpoint (rank {args.rank}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="troop",
        description="Reduced-order models by trajectory-based optimization "
        "of oblique projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument(
            "--substeps",
            type=int,
            default=50,
            help="RK4 steps per sampling interval (default 50)",
        )

    p = sub.add_parser("generate", help="simulate impulse-response training data")
    p.add_argument("--model", required=True, help='"toy" or a model JSON path')
    p.add_argument(
        "--amplitudes",
        required=True,
        help='comma list like "0.5,1.0" or "random:<count>:<lo>,<hi>"',
    )
    p.add_argument("--samples", type=int, required=True, help="samples per trajectory")
    p.add_argument("--horizon", type=float, default=10.0, help="time horizon (default 10)")
    p.add_argument("--out", required=True, help="output dataset JSON path")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="optimize a subspace pair on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="training dataset JSON")
    p.add_argument("--rank", type=int, default=2, help="reduced order (default 2)")
    p.add_argument("--gamma", type=float, default=1e-3, help="regularization weight")
    p.add_argument(
        "--init", default="bt", help="bt, pod, or file:<checkpoint> (default bt)"
    )
    p.add_argument("--c1", type=float, default=0.01, help="sufficient-decrease constant")
    p.add_argument("--c2", type=float, default=0.1, help="curvature constant")
    p.add_argument(
        "--tol", type=float, default=1e-8, help="squared gradient-norm tolerance"
    )
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--quad-order", type=int, default=2, help="adjoint quadrature points")
    p.add_argument(
        "--quad-panels",
        type=int,
        default=1,
        help="quadrature panels per sampling interval (composite rule)",
    )
    p.add_argument(
        "--transport",
        choices=("exponential", "retraction"),
        default="exponential",
        help="direction transport mode",
    )
    p.add_argument("--threads", type=int, default=None, help="trajectory parallelism")
    p.add_argument("--out", required=True, help="output checkpoint JSON path")
    p.add_argument("--trace", default=None, help="trace JSONL path (default <out>.trace.jsonl)")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compare checkpoints against a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument(
        "--checkpoints", required=True, help="comma list of label=checkpoint.json"
    )
    p.add_argument(
        "--input",
        default=None,
        help='optional input signal "sin:<amp>:<omega>" (zero initial condition)',
    )
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="POD or balanced-truncation checkpoint")
    p.add_argument("--method", choices=("pod", "bt"), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None, help="dataset JSON (required for pod)")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        BlowUp,
        NonFiniteState,
        LineSearchFailed,
        SingularPairing,
        DegenerateDenominator,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (TroopError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
