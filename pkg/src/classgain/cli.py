"""Command-line interface: ``classgain {gen,classify,eval,repro}``.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import false_classification_ratios, run_experiment
from .exceptions import ClassGainError, NumericalError, ValidationError
from .io import (
    atomic_write,
    dump_json,
    format_spec,
    label_pixels,
    parse_spec,
    read_labels,
    read_signal,
    render_svg,
    scale_path,
    sha256_file,
    write_csv_labels,
    write_csv_values,
    write_pgm_raw,
    write_pgm_signal,
)
from .model import MixtureSpec, generate
from .pipeline import METHODS, classify
from .rounding import TypicalityEpsilons
from .solver import SolverConfig

logger = logging.getLogger("classgain")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# Built-in reproductions of the four published experiments. Per-class target
# ratios are listed in class order and compared with the mean over seeds.
REPRO_CASES = {
    "one": {
        "spec": MixtureSpec((128.0, 16.0), (16.0, 16.0), runs=((0, 64), (1, 64), (0, 64), (1, 64))),
        "targets": (0.0, 0.0),
        "band": 0.10,
    },
    "two": {
        "spec": MixtureSpec((128.0, 128.0), (2500.0, 25.0), runs=((0, 64), (1, 64), (0, 64), (1, 64))),
        "targets": (0.1641, 0.0625),
        "band": 0.10,
    },
    "three": {
        "spec": MixtureSpec((50.0, 5.0), (2500.0, 25.0), runs=((0, 64), (1, 64), (0, 64), (1, 64))),
        "targets": (0.1016, 0.0391),
        "band": 0.10,
    },
    # pixel layout assumed: top half one class, bottom half the other
    "twodim": {
        "spec": MixtureSpec((200.0, 5.0), (400.0, 400.0), runs=((0, 512), (1, 512)), grid=(32, 32)),
        "targets": (0.0193, 0.0052),
        "band": 0.05,
    },
}


class UsageError(ClassGainError):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"20"`` -> 0..19, ``"3,5,8"`` -> those seeds, ``"10-14"`` -> 10..14."""
    text = text.strip()
    try:
        if "," in text:
            return [int(t) for t in text.split(",") if t.strip()]
        if "-" in text[1:]:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        count = int(text)
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}") from None
    if count < 1:
        raise UsageError("seed count must be positive")
    return list(range(count))


def _eps(args, n_samples: int, value_range: float) -> TypicalityEpsilons:
    default = TypicalityEpsilons.default_for(n_samples, value_range)
    return TypicalityEpsilons(
        args.eps1 if args.eps1 is not None else default.eps1,
        args.eps2 if args.eps2 is not None else default.eps2,
        args.eps3 if args.eps3 is not None else default.eps3,
    )


def _manifest(args, argv, config: dict, seeds, inputs: dict, outputs: list, extra: dict | None = None) -> dict:
    return {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seeds": list(seeds),
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in inputs.items()},
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": [str(p) for p in outputs],
        **(extra or {}),
    }


def cmd_gen(args, argv) -> int:
    if not args.input:
        raise UsageError("gen needs --input SPEC_FILE")
    spec_path = Path(args.input)
    try:
        text = spec_path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read spec: {exc}") from None
    spec, n = parse_spec(text)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    signal, truth = generate(spec, n)
    out = Path(args.out)
    fmt = args.format or ("pgm" if signal.is_grid else "csv")
    outputs = []
    if fmt == "pgm":
        if not signal.is_grid:
            raise UsageError("--format pgm needs a spec with a grid")
        outputs += list(write_pgm_signal(out / "signal.pgm", signal.as_array()))
    else:
        outputs.append(write_csv_values(out / "signal.csv", signal.values))
    outputs.append(write_csv_labels(out / "truth.csv", truth.labels))
    outputs.append(atomic_write(out / "spec.txt", format_spec(spec, signal.n_samples)))
    manifest = _manifest(args, argv, {"spec": format_spec(spec, signal.n_samples), "format": fmt},
                         [spec.seed], {"spec": spec_path}, outputs)
    outputs.append(dump_json(out / "manifest.json", manifest))
    print(f"wrote {signal.n_samples} samples to {out}")
    return EXIT_OK


def cmd_classify(args, argv) -> int:
    if not args.input:
        raise UsageError("classify needs --input SIGNAL")
    if args.classes is None or args.classes < 1:
        raise UsageError("--classes must be a positive integer")
    in_path = Path(args.input)
    if not in_path.exists():
        raise ValidationError(f"input {in_path} does not exist")
    signal = read_signal(in_path)
    J = args.classes
    seed = args.seed if args.seed is not None else 0
    cfg = SolverConfig(restarts=args.restarts, seed=seed)
    eps = _eps(args, signal.n_samples, signal.value_range) if signal.value_range > 0 else None
    started = time.perf_counter()
    result = classify(signal, J, args.method, cfg=cfg, round_k=args.round_k, seed=seed, eps=eps)
    elapsed = time.perf_counter() - started
    if args.method == "relax" and not np.isfinite(result.objective):
        raise NumericalError("classification produced a non-finite objective")

    out = Path(args.out)
    outputs = []
    if signal.is_grid:
        outputs.append(write_pgm_raw(out / "labels.pgm", label_pixels(result.scheme.labels, J).reshape(signal.shape)))
    else:
        outputs.append(write_csv_labels(out / "labels.csv", result.scheme.labels))
    counts = np.bincount(result.scheme.labels, minlength=J)
    report = {
        "kind": "classify",
        "method": args.method,
        "n_samples": signal.n_samples,
        "n_classes": J,
        "shape": list(signal.shape),
        "seed": seed,
        "objective": result.objective,
        "gain": result.gain,
        "class_counts": counts.tolist(),
        "timing": {"total_seconds": elapsed},
    }
    if result.solve is not None:
        report["relaxation"] = {k: v for k, v in result.solve.summary().items() if k != "wall_time"}
        report["timing"]["solve_seconds"] = result.solve.wall_time
    if result.rounding is not None:
        report["rounding"] = result.rounding.summary()
    if result.gmm is not None:
        report["gmm"] = {
            "weights": result.gmm.weights,
            "means": result.gmm.means,
            "variances": result.gmm.variances,
            "log_likelihood": result.gmm.log_likelihood,
        }
    outputs.append(dump_json(out / "report.json", report))
    outputs.append(atomic_write(out / "figure.svg", render_svg(signal, result.scheme.labels)))
    inputs = {"signal": in_path}
    if in_path.suffix.lower() == ".pgm" and scale_path(in_path).exists():
        inputs["scale"] = scale_path(in_path)
    config = {"classes": J, "method": args.method, "solver": cfg.to_dict(), "round_k": args.round_k,
              "eps": None if eps is None else [eps.eps1, eps.eps2, eps.eps3]}
    outputs.append(dump_json(out / "manifest.json", _manifest(args, argv, config, [seed], inputs, outputs)))
    print(f"objective {result.objective:.6f}  gain {result.gain:.6g}  counts {counts.tolist()}")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    if not args.input or not args.truth:
        raise UsageError("eval needs --input LABELS and --truth LABELS")
    if args.classes is None or args.classes < 1:
        raise UsageError("--classes must be a positive integer")
    for p in (args.input, args.truth):
        if not Path(p).exists():
            raise ValidationError(f"{p} does not exist")
    est = read_labels(args.input, args.classes)
    tru = read_labels(args.truth, args.classes)
    result = false_classification_ratios(est, tru, args.classes)
    payload = {"kind": "eval", "n_classes": args.classes, **result.to_dict()}
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        dump_json(Path(args.out) / "eval.json", payload)
    return EXIT_OK


def cmd_repro(args, argv) -> int:
    case = REPRO_CASES[args.case]
    seeds = parse_seeds(args.seeds) if args.seeds else list(range(20))
    cfg = SolverConfig(restarts=args.restarts)
    method = args.method
    if method == "brute":
        raise UsageError("brute force cannot handle the built-in cases (N >= 256)")
    started = time.perf_counter()
    exp = run_experiment(case["spec"], method, seeds, cfg=cfg, round_k=args.round_k)
    elapsed = time.perf_counter() - started
    targets, band = case["targets"], case["band"]
    if len(seeds) == 1:
        payload = {"kind": "eval", "n_classes": case["spec"].n_classes, **exp.runs[0].result.to_dict()}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        agg = exp.aggregate()
        means = agg["class_ratios"]["mean"]
        rows = []
        print(f"case {args.case}  method {method}  seeds {len(seeds)}  ({elapsed:.2f} s)")
        print(f"{'class':>5} {'published':>10} {'mean':>8} {'median':>8} {'min':>8} {'max':>8}  within")
        for j, target in enumerate(targets):
            ok = abs(means[j] - target) <= band
            rows.append({"class": j + 1, "published": target, "mean": means[j], "within_band": ok})
            print(
                f"{j + 1:>5} {100 * target:>9.2f}% {100 * means[j]:>7.2f}% "
                f"{100 * agg['class_ratios']['median'][j]:>7.2f}% {100 * agg['class_ratios']['min'][j]:>7.2f}% "
                f"{100 * agg['class_ratios']['max'][j]:>7.2f}%  {'yes' if ok else 'NO'} (+/-{100 * band:.0f} pp)"
            )
        print(f"overall error median {100 * agg['overall_error']['median']:.2f}%, "
              f"zero-error seeds {agg['zero_error_seeds']}/{len(seeds)}")
        payload = {"kind": "repro", "case": args.case, "band": band, "comparison": rows, "aggregate": agg,
                   "per_seed": [r.result.to_dict() for r in exp.runs], "timing": {"total_seconds": elapsed}}
    if args.out:
        out = Path(args.out)
        path = dump_json(out / "repro.json", payload)
        config = {"case": args.case, "spec": format_spec(case["spec"]), "method": method,
                  "solver": cfg.to_dict(), "round_k": args.round_k}
        dump_json(out / "manifest.json", _manifest(args, argv, config, seeds, {}, [path]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="classgain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a synthetic mixture signal")
    gen.add_argument("--input", help="mixture spec file")
    gen.add_argument("--format", choices=("csv", "pgm"), default=None)

    cls = sub.add_parser("classify", parents=[common], help="classify a CSV or PGM signal")
    cls.add_argument("--input", help="signal file (.csv or .pgm)")
    cls.add_argument("--classes", "-J", type=int, default=None)
    cls.add_argument("--method", choices=METHODS, default="relax")
    cls.add_argument("--restarts", type=int, default=8)
    cls.add_argument("--round-k", type=int, default=32)
    cls.add_argument("--eps1", type=float, default=None)
    cls.add_argument("--eps2", type=float, default=None)
    cls.add_argument("--eps3", type=float, default=None)

    ev = sub.add_parser("eval", parents=[common], help="false classification ratios of a labeling")
    ev.add_argument("--input", help="estimated labels (.csv or .pgm)")
    ev.add_argument("--truth", help="ground-truth labels (.csv or .pgm)")
    ev.add_argument("--classes", "-J", type=int, default=None)

    rep = sub.add_parser("repro", parents=[common], help="rerun a published experiment")
    rep.add_argument("case", choices=tuple(REPRO_CASES))
    rep.add_argument("--seeds", default=None, help="count (20), list (1,2,3) or range (0-19)")
    rep.add_argument("--method", choices=("relax", "kmeans", "em"), default="relax")
    rep.add_argument("--restarts", type=int, default=8)
    rep.add_argument("--round-k", type=int, default=32)
    return parser


COMMANDS = {"gen": cmd_gen, "classify": cmd_classify, "eval": cmd_eval, "repro": cmd_repro}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("gen", "classify") and not args.out:
        print(f"error: {args.command} needs --out DIR", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ClassGainError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
