"""``snvec gen|certify|bench`` command-line entry point.

Exit codes: 0 success, 2 validation error (bad state data), 3 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .bases import OptimizerConfig
from .qudit import InvalidDimensionError, StateFileError, ValidationError, load_state, save_state
from .states import (
    SamplerConfig,
    SamplerMode,
    fixed_lambda1_sample,
    ghz_random_noise_sample,
    haar_random_density,
    psi432_coefficients,
    psi432_state,
)

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 2, 3
GEN_MODES = ("lebesgue", "fixed-lambda1", "ghz-noise", "psi432")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _vectors(text: str) -> tuple[tuple[int, ...], ...]:
    """``"422,332"`` or ``"4-2-2,3-3-2"``."""
    out = []
    for item in text.split(","):
        item = item.strip()
        digits = item.split("-") if "-" in item else list(item)
        if not item or not all(d.isdigit() for d in digits):
            raise argparse.ArgumentTypeError(f"bad candidate vector {item!r}")
        out.append(tuple(int(d) for d in digits))
    return tuple(out)


def _criteria(text: str) -> tuple[str, ...]:
    return tuple(c.strip() for c in text.split(",") if c.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="snvec", description="Schmidt-number-vector certification and benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dims_default):
        sp.add_argument("--dims", type=_int_list, default=dims_default, help="local dimensions, e.g. 3,3,3")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("-v", "--verbose", action="store_true")

    def optimizer(sp):
        sp.add_argument("--criteria", type=_criteria, default=bench.CRITERIA,
                        help="comma-separated subset of " + ",".join(bench.CRITERIA))
        sp.add_argument("--opt-evals", type=int, default=300, help="see-saw evaluation budget (0: fixed bases)")
        sp.add_argument("--opt-restarts", type=int, default=3, help="random see-saw starts")
        sp.add_argument("--opt-seed", type=int, default=0)
        sp.add_argument("--entropy-iters", type=int, default=30, help="gradient steps per entropy frame (0: plain)")
        sp.add_argument("--entropy-restarts", type=int, default=0, help="extra random entropy frames")

    g = sub.add_parser("gen", help="write sampled states as JSON files")
    common(g, None)
    g.add_argument("--samples", type=int, default=1)
    g.add_argument("--mode", choices=GEN_MODES, default="lebesgue")
    g.add_argument("--force-p", type=float, default=None)
    g.add_argument("--lambda1", type=float, default=None)

    c = sub.add_parser("certify", help="certify the Schmidt-number vector of a state file")
    c.add_argument("state", type=str)
    common(c, None)
    optimizer(c)
    c.add_argument("--repair", action="store_true", help="symmetrize, clip and renormalize the input")
    c.add_argument("--target-state", type=str, default=None, help="pure-state file for the fidelity criterion")

    b = sub.add_parser("bench", help="run a random-state experiment")
    b.add_argument("experiment", choices=("table1", "table2", "fig2"))
    common(b, None)
    optimizer(b)
    b.add_argument("--samples", type=int, default=10000)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--force-p", type=float, default=None, help="table2 only: fixed GHZ weight (debugging)")
    b.add_argument("--fig2-target", type=_vectors, default=bench.FIG2_TARGET,
                   help="fig2 only: candidates to exclude, e.g. 422,332")
    return p


def _optimizer(args) -> OptimizerConfig:
    return OptimizerConfig(max_evals=args.opt_evals, restarts=args.opt_restarts, seed=args.opt_seed)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_bench(args) -> int:
    default_dims = (2, 3, 4) if args.experiment == "fig2" else (3, 3, 3)
    cfg = bench.ExperimentConfig(
        args.experiment, samples=args.samples, seed=args.seed, dims=args.dims or default_dims,
        criteria=args.criteria, optimizer=_optimizer(args), out=args.out, workers=args.workers,
        force_p=args.force_p, entropy_iters=args.entropy_iters, entropy_restarts=args.entropy_restarts,
        fig2_target=args.fig2_target)
    if args.experiment == "fig2":
        summary, records = bench.run_fig2(cfg)
    else:
        summary, records = bench.run_table(cfg)
    sys.stdout.write(summary.format_text())
    if args.out is not None:
        if args.format == "csv":
            _write(bench.records_csv(records, cfg), args.out)
        else:
            payload = {"metadata": bench.metadata_lines(cfg), "summary": summary.to_json(),
                       "records": bench.records_json(records)}
            _write(json.dumps(payload, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    state = load_state(args.state, repair=args.repair)
    if args.dims and tuple(args.dims) != tuple(state.dims):
        raise bench.ConfigError(f"--dims {args.dims} does not match the file's dims {state.dims}")
    target = load_state(args.target_state) if args.target_state else None
    if target is not None and not hasattr(target, "amplitudes"):
        raise ValidationError("the fidelity target must be a pure state (a 'vector' field)")
    cfg = bench.ExperimentConfig("certify", samples=1, seed=args.seed, dims=state.dims, criteria=args.criteria,
                                 optimizer=_optimizer(args), entropy_iters=args.entropy_iters,
                                 entropy_restarts=args.entropy_restarts)
    result = bench.certify(state, cfg, target)
    _write(json.dumps(result, indent=1) + "\n", args.out)
    return EXIT_OK


def _gen_state(args, index: int):
    mode = args.mode
    meta = {"seed": args.seed, "index": index, "mode": mode}
    if mode == "lebesgue":
        rho = haar_random_density(SamplerConfig(SamplerMode.LEBESGUE, args.seed, args.dims or (3, 3, 3)), index)
    elif mode == "fixed-lambda1":
        s = fixed_lambda1_sample(SamplerConfig(SamplerMode.FIXED_LAMBDA1, args.seed, args.dims or (3, 3, 3)),
                                 index, args.lambda1)
        rho, meta["lambda1"] = s.rho, float(bench.fmt(s.lambda1))
    elif mode == "ghz-noise":
        dims = args.dims or (3, 3, 3)
        if len(set(dims)) != 1:
            raise bench.ConfigError(f"ghz-noise needs equal local dimensions, got {dims}")
        s = ghz_random_noise_sample(args.seed, index, d=dims[0], N=len(dims), p=args.force_p)
        rho, meta["p"] = s.rho, float(bench.fmt(s.p))
    else:
        if args.dims and tuple(args.dims) != (2, 3, 4):
            raise bench.ConfigError(f"psi432 states live on dims (2, 3, 4), got {args.dims}")
        c = psi432_coefficients(args.seed, index)
        rho = psi432_state(c)
        meta["c"] = [[float(bench.fmt(z.real)), float(bench.fmt(z.imag))] for z in np.asarray(c)]
    return rho, meta


def cmd_gen(args) -> int:
    if args.out is None:
        raise bench.ConfigError("gen needs --out <directory>")
    if args.samples < 1:
        raise bench.ConfigError(f"samples must be at least 1, got {args.samples}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(args.samples):
        state, meta = _gen_state(args, i)
        name = f"state_{i:06d}.json"
        save_state(state, out / name)
        lines.append(json.dumps({"file": name, **meta}))
    _write("\n".join(lines) + "\n", str(out / "metadata.jsonl"))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"gen": cmd_gen, "certify": cmd_certify, "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StateFileError, ValidationError, InvalidDimensionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
