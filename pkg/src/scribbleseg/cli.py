"""Batch command line: segment, parameter sweeps, corpus generation, serving.

Exit codes: 0 ok, 2 bad input, 3 solver failure, 4 convexity violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import kernels
from .errors import (
    ConvexityViolationError,
    InvalidInputError,
    NotPositiveDefiniteError,
    OracleTooLargeError,
    ScribbleSegError,
    SingularSystemError,
    SolverFailureError,
)
from .feedback import ALGORITHMS, FeedbackParams, IterationTrace, error_rate, run_algorithm
from .formats import load_image, load_seed_mask, load_trimap, save_labels, save_probability_map
from .graph import DEFAULT_BETA, DEFAULT_WEIGHT_FLOOR
from .solver import SolveOptions

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONVEXITY = 4

SWEEPABLE = ("epsilon", "lambda", "delta")


@dataclass
class RunConfig:
    algorithm: str
    image: str
    seeds: str
    out: str
    trimap: str | None = None
    beta: float = DEFAULT_BETA
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    epsilon: float = 0.1
    delta: float = 0.1
    lam: float = 0.005
    xi: float | None = None
    max_iter: int = 10
    sample_fraction: float = 1.0
    rng_seed: int = 0
    tolerance: float = 1e-8
    dump_iterations: bool = False

    def feedback_params(self) -> FeedbackParams:
        return FeedbackParams(
            epsilon_seed=self.epsilon,
            delta=self.delta,
            lam=self.lam,
            xi=self.xi,
            max_outer_iterations=self.max_iter,
            sample_fraction=self.sample_fraction,
            rng_seed=self.rng_seed,
        )

    def solve_options(self) -> SolveOptions:
        return SolveOptions(tolerance=self.tolerance)


def _execute(config: RunConfig):
    """Run the configured algorithm; returns (probability map, trace, dumps)."""
    img = load_image(config.image)
    seeds = load_seed_mask(config.seeds, expected_shape=img.shape).to_seed_state()
    trimap = load_trimap(config.trimap, expected_shape=img.shape) if config.trimap else None

    dumps: list = []

    def collect(iteration, pmap):
        dumps.append((iteration, pmap))

    pmap, trace = run_algorithm(
        config.algorithm, img, seeds, config.feedback_params(), config.solve_options(),
        beta=config.beta, floor=config.weight_floor, ground_truth=trimap,
        on_iteration=collect if config.dump_iterations else None,
    )
    return pmap, trace, dumps


def _write_outputs(config: RunConfig, pmap, trace: IterationTrace, dumps) -> None:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    save_labels(pmap.labels, out / "labels.png")
    save_probability_map(pmap, out / "probability.png")
    save_probability_map(pmap, out / "probability.pmap")
    if config.dump_iterations:
        for iteration, snapshot in dumps:
            save_probability_map(snapshot, out / f"probability_iter{iteration:03d}.png")
            save_probability_map(snapshot, out / f"probability_iter{iteration:03d}.pmap")
    with open(out / "trace.jsonl", "w") as fh:
        for record in trace.record_dicts():
            fh.write(json.dumps(record) + "\n")
    summary = {
        "algorithm": config.algorithm,
        "image": str(config.image),
        "seeds": str(config.seeds),
        "trimap": str(config.trimap) if config.trimap else None,
        "beta": config.beta,
        "weight_floor": config.weight_floor,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "lambda": config.lam,
        "xi": config.xi,
        "max_iter": config.max_iter,
        "sample_fraction": config.sample_fraction,
        "rng_seed": config.rng_seed,
        "tolerance": config.tolerance,
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "degraded": trace.degraded,
        "solver_backend": kernels.BACKEND_NAME,
    }
    (out / "run.json").write_text(json.dumps(summary, indent=2) + "\n")


def cmd_segment(config: RunConfig) -> int:
    def task():
        pmap, trace, dumps = _execute(config)
        _write_outputs(config, pmap, trace, dumps)
        last = trace.records[-1]
        line = (
            f"{config.algorithm}: {trace.iterations} iterations, "
            f"potential {last.potential:.4f}, boundary {last.boundary_count}"
        )
        if last.error_count is not None:
            line += f", errors {last.error_count}"
        print(line)

    return _guarded(task)


def _sweep_config(base: RunConfig, assignment: dict[str, float]) -> RunConfig:
    cfg = RunConfig(**vars(base))
    for name, value in assignment.items():
        setattr(cfg, {"epsilon": "epsilon", "lambda": "lam", "delta": "delta"}[name], value)
    return cfg


def cmd_sweep(base: RunConfig, param: str, values, param2=None, values2=None) -> int:
    """Grid over one or two parameters; one CSV row per point.

    Points whose lambda exceeds the image's minimum edge weight are flagged
    infeasible instead of aborting the sweep.
    """

    def task():
        if base.trimap is None:
            raise InvalidInputError("sweeps need --trimap to report error rates")
        grid = [{param: v} for v in values]
        if param2 is not None:
            grid = [{**a, param2: v2} for a in grid for v2 in values2]
        out = Path(base.out)
        out.mkdir(parents=True, exist_ok=True)
        columns = [param] + ([param2] if param2 else []) + [
            "error_rate", "final_potential", "iterations", "feasible",
        ]
        rows = []
        for assignment in grid:
            cfg = _sweep_config(base, assignment)
            row = {k: repr(v) for k, v in assignment.items()}
            try:
                pmap, trace, _ = _execute(cfg)
                trimap = load_trimap(cfg.trimap)
                row.update(
                    error_rate=repr(error_rate(pmap.labels, trimap)),
                    final_potential=repr(trace.records[-1].potential),
                    iterations=trace.iterations,
                    feasible="true",
                )
            except (ConvexityViolationError, SolverFailureError, NotPositiveDefiniteError) as exc:
                print(f"infeasible {assignment}: {exc}", file=sys.stderr)
                row.update(error_rate="", final_potential="", iterations="", feasible="false")
            rows.append(row)
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}")

    return _guarded(task)


def cmd_make_corpus(out: str, size: int, rng_seed: int) -> int:
    def task():
        from .corpus import write_corpus

        dirs = write_corpus(out, size=size, rng_seed=rng_seed)
        print(f"wrote {len(dirs)} corpus cases under {out}")

    return _guarded(task)


def cmd_serve(host: str, port: int, session_dir: str | None, max_pixels: int) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(session_dir=session_dir, max_pixels=max_pixels)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return EXIT_OK


def _guarded(task) -> int:
    try:
        task()
        return EXIT_OK
    except ConvexityViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVEXITY
    except (SolverFailureError, NotPositiveDefiniteError, SingularSystemError, OracleTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    except (ScribbleSegError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def _add_run_flags(p: argparse.ArgumentParser, require_algorithm: bool) -> None:
    p.add_argument("--algorithm", choices=ALGORITHMS, required=require_algorithm,
                   default=None if require_algorithm else "ibrw",
                   help="which walk to run (default for sweeps: ibrw)")
    p.add_argument("--image", required=True, help="input image (PNG, PGM, or PPM)")
    p.add_argument("--seeds", required=True, help="seed mask PNG (0 none, 1 background, 2 foreground)")
    p.add_argument("--trimap", default=None, help="ground-truth trimap PNG for error reporting")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA, help="edge weight contrast scale (default %(default)s)")
    p.add_argument("--weight-floor", type=float, default=DEFAULT_WEIGHT_FLOOR,
                   help="positive offset added to every edge weight (default %(default)s)")
    p.add_argument("--epsilon", type=float, default=0.1, help="semi-seed promotion threshold (default %(default)s)")
    p.add_argument("--delta", type=float, default=0.1, help="boundary band half width (default %(default)s)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.005,
                   help="boundary repulsion trade-off (default %(default)s)")
    p.add_argument("--xi", type=float, default=None,
                   help="potential plateau threshold (default: 1e-3 of the initial potential)")
    p.add_argument("--max-iter", type=int, default=10, help="outer iteration cap (default %(default)s)")
    p.add_argument("--sample-fraction", type=float, default=1.0,
                   help="fraction of eligible semi-seeds promoted per round (default %(default)s)")
    p.add_argument("--rng-seed", type=int, default=0, help="seed for the semi-seed sampler (default %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-8, help="solver tolerance (default %(default)s)")
    p.add_argument("--dump-iterations", action="store_true", help="write per-iteration probability rasters")


def _config_from(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        algorithm=args.algorithm,
        image=args.image,
        seeds=args.seeds,
        trimap=args.trimap,
        out=args.out,
        beta=args.beta,
        weight_floor=args.weight_floor,
        epsilon=args.epsilon,
        delta=args.delta,
        lam=args.lam,
        xi=args.xi,
        max_iter=args.max_iter,
        sample_fraction=args.sample_fraction,
        rng_seed=args.rng_seed,
        tolerance=args.tolerance,
        dump_iterations=args.dump_iterations,
    )


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise InvalidInputError(f"bad value list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribbleseg",
        description="Scribble-seeded segmentation via random walks with boundary penalties and seed feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="run one algorithm on an image + seed mask")
    _add_run_flags(seg, require_algorithm=True)

    sweep = sub.add_parser("sweep", help="grid over epsilon/lambda/delta, one CSV row per point")
    _add_run_flags(sweep, require_algorithm=False)
    sweep.add_argument("--param", choices=SWEEPABLE, required=True)
    sweep.add_argument("--values", required=True, help="comma-separated value list")
    sweep.add_argument("--param2", choices=SWEEPABLE, default=None)
    sweep.add_argument("--values2", default=None)

    corpus = sub.add_parser("make-corpus", help="write the bundled synthetic corpus to disk")
    corpus.add_argument("--out", required=True)
    corpus.add_argument("--size", type=int, default=48)
    corpus.add_argument("--rng-seed", type=int, default=2024)

    serve = sub.add_parser("serve", help="run the interactive segmentation service")
    serve.add_argument("--host", default=os.environ.get("SCRIBBLESEG_HOST", "127.0.0.1"))
    serve.add_argument("--port", type=int, default=int(os.environ.get("SCRIBBLESEG_PORT", "8000")))
    serve.add_argument("--session-dir", default=os.environ.get("SCRIBBLESEG_SESSION_DIR"))
    serve.add_argument("--max-pixels", type=int,
                       default=int(os.environ.get("SCRIBBLESEG_MAX_PIXELS", str(1 << 20))))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "segment":
        return cmd_segment(_config_from(args))
    if args.command == "sweep":
        if (args.param2 is None) != (args.values2 is None):
            print("error: --param2 and --values2 go together", file=sys.stderr)
            return EXIT_BAD_INPUT
        if args.param2 == args.param and args.param2 is not None:
            print("error: --param2 must differ from --param", file=sys.stderr)
            return EXIT_BAD_INPUT
        try:
            values = _parse_values(args.values)
            values2 = _parse_values(args.values2) if args.values2 else None
        except InvalidInputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BAD_INPUT
        return cmd_sweep(_config_from(args), args.param, values, args.param2, values2)
    if args.command == "make-corpus":
        return cmd_make_corpus(args.out, args.size, args.rng_seed)
    if args.command == "serve":
        return cmd_serve(args.host, args.port, args.session_dir, args.max_pixels)
    return EXIT_BAD_INPUT


def entrypoint() -> None:
    sys.exit(main())
