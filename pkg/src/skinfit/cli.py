"""Command-line toolkit: synthesize data, train the classifier, decompose,
reconstruct, and evaluate mesh animations.

Commands print machine-readable CSV to stdout; prose goes only to stdout in
non-quiet mode and warnings always go to stderr. `--strict` turns any warning
into a failing exit code. File outputs are written atomically.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import cnn, codec, metrics, pipeline
from .anim import AnimSequence, lbs_sequence, make_synthetic_rig, trajectories
from .cluster import cluster_trajectories
from .fitting import SolverConfig
from .formats import (FLOAT_FMT, atomic_write_bytes, atomic_write_text, read_anim,
                      write_anim, write_labels, write_weight_pairs)
from .training import TrainConfig, train, training_log_rows

SUMMARY_HEADER = "n,p,b," + metrics.CSV_HEADER


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--quiet", action="store_true",
                        help="print only machine-readable CSV on stdout")
    parser.add_argument("--strict", action="store_true",
                        help="treat warnings as errors (non-zero exit)")


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _load_probabilities(args, seq: AnimSequence) -> np.ndarray:
    kind, _, value = args.init.partition(":")
    if kind == "cluster":
        try:
            k = int(value)
        except ValueError:
            raise ValueError(f"--init cluster needs an integer, got {value!r}") from None
        return cluster_trajectories(seq, k, seed=args.seed).astype(np.float64)
    if kind == "cnn":
        if not value:
            raise ValueError("--init cnn needs a checkpoint path")
        model = cnn.load_checkpoint(value)
        expected = 3 * seq.frame_count
        if model.input_len != expected:
            raise ValueError(
                f"checkpoint was trained on length-{model.input_len} trajectories but this "
                f"animation has length {expected}; train a model for this frame count")
        return cnn.forward(model, trajectories(seq))
    raise ValueError(f"unknown initializer {args.init!r}; use cluster:<k> or cnn:<checkpoint>")


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seq, weights, _ = make_synthetic_rig(
            args.bones, args.vertices_per_segment, args.frames, seed=args.seed + i)
        stem = out_dir / f"rig_{i:03d}"
        write_anim(stem.with_suffix(".anim"), seq)
        labels = (weights.to_dense(args.bones) > 0.0).astype(np.int64)
        write_labels(stem.with_suffix(".labels"), labels)
        write_weight_pairs(stem.with_suffix(".weights"), weights, args.bones)
        _say(args, f"wrote {stem}.anim ({seq.vertex_count} vertices, {seq.frame_count} frames)")
    return 0


def cmd_train(args) -> int:
    data_dir = Path(args.data_dir)
    anim_paths = sorted(data_dir.glob("*.anim"))
    if not anim_paths:
        raise ValueError(f"no .anim files in {data_dir}")
    from .formats import read_labels  # local to keep module import light

    sequences = [(p, read_anim(p)) for p in anim_paths]
    frame_counts = {p.name: s.frame_count for p, s in sequences}
    if len(set(frame_counts.values())) > 1:
        detail = ", ".join(f"{name}: {f} frames" for name, f in sorted(frame_counts.items()))
        raise ValueError(f"all animations must share one frame count; got {detail}")

    inputs = []
    labels = []
    for path, seq in sequences:
        label_path = path.with_suffix(".labels")
        if not label_path.exists():
            raise ValueError(f"missing label file {label_path}")
        lab = read_labels(label_path)
        if lab.shape[0] != seq.vertex_count:
            raise ValueError(f"{label_path}: {lab.shape[0]} rows for {seq.vertex_count} vertices")
        if lab.shape[1] > args.b_max:
            raise ValueError(f"{label_path}: {lab.shape[1]} bones exceed --b-max {args.b_max}")
        padded = np.zeros((lab.shape[0], args.b_max), dtype=np.int64)
        padded[:, :lab.shape[1]] = lab
        inputs.append(trajectories(seq))
        labels.append(padded)

    config = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                         epochs=args.epochs, seed=args.seed)
    model, history = train(np.vstack(inputs), np.vstack(labels), config)
    cnn.save_checkpoint(args.out, model)
    log_path = args.log or str(args.out) + ".log.csv"
    atomic_write_text(log_path, "\n".join(training_log_rows(history)) + "\n")
    final = history[-1]
    _say(args, f"trained {final.epoch} epochs: loss {final.loss:.6f}, "
               f"binary accuracy {final.binary_accuracy:.4f}")
    _say(args, f"wrote {args.out} and {log_path}")
    return 0


def cmd_decompose(args) -> int:
    seq = read_anim(args.anim)
    if args.rest_frame is not None:
        if not 0 <= args.rest_frame < seq.frame_count:
            raise ValueError(f"--rest-frame {args.rest_frame} out of range")
        seq = AnimSequence(seq.positions, seq.faces, seq.positions[args.rest_frame])
    probabilities = _load_probabilities(args, seq)
    config = SolverConfig(alternation_iterations=args.iterations,
                          cg_tolerance=args.cg_tolerance)
    result = pipeline.decompose(seq, probabilities, epsilon=args.epsilon, config=config)

    atomic_write_bytes(args.out, codec.encode(result.model))
    trace_path = args.trace or str(args.out) + ".trace.csv"
    atomic_write_text(trace_path, "\n".join(result.trace.csv_rows()) + "\n")

    if not args.quiet:
        print(SUMMARY_HEADER)
    print(f"{seq.vertex_count},{seq.frame_count},{result.model.bone_count},"
          + result.report.csv_row())
    return 0


def cmd_reconstruct(args) -> int:
    data = Path(args.input).read_bytes()
    model = codec.decode(data)
    write_anim(args.out, lbs_sequence(model))
    _say(args, f"wrote {args.out}")
    return 0


def _read_approximation(path) -> tuple[AnimSequence, int | None]:
    raw = Path(path).read_bytes()
    if raw[:4] == codec.MAGIC:
        model = codec.decode(raw)
        return lbs_sequence(model), model.bone_count
    return read_anim(path), None


def cmd_evaluate(args) -> int:
    if (args.frame is None) != (args.per_vertex is None):
        raise ValueError("--frame and --per-vertex must be given together")
    orig = read_anim(args.orig)
    approx, bone_count = _read_approximation(args.approx)
    report = metrics.evaluate(orig, approx, bone_count=bone_count)
    if not args.quiet:
        print(metrics.CSV_HEADER)
    print(report.csv_row())
    if args.frame is not None:
        errors = metrics.per_vertex_error(orig, approx, args.frame)
        atomic_write_text(args.per_vertex, "\n".join(FLOAT_FMT % e for e in errors) + "\n")
    return 0


def cmd_info(args) -> int:
    path = Path(args.file)
    raw = path.read_bytes()
    if not args.quiet:
        print("format,n,p,b,faces")
    if raw[:4] == codec.MAGIC:
        model = codec.decode(raw)
        print(f"SKND,{model.vertex_count},{model.frame_count},{model.bone_count},"
              f"{model.faces.shape[0]}")
    else:
        seq = read_anim(path)
        print(f"ANIM,{seq.vertex_count},{seq.frame_count},,{seq.face_count}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinfit",
        description="Compress mesh animations into linear-blend-skinning models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic rigged animations")
    p.add_argument("--bones", type=int, default=3)
    p.add_argument("--vertices-per-segment", type=int, default=64)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="train the trajectory classifier")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training-log CSV (default <out>.log.csv)")
    p.add_argument("--b-max", type=int, default=cnn.DEFAULT_B_MAX)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("decompose", help="fit a skinning model to an animation")
    p.add_argument("--anim", required=True)
    p.add_argument("--init", required=True, help="cluster:<k> or cnn:<checkpoint>")
    p.add_argument("--out", required=True, help="compressed output path")
    p.add_argument("--trace", default=None, help="fit-trace CSV (default <out>.trace.csv)")
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--cg-tolerance", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rest-frame", type=int, default=None,
                   help="use this frame as the rest pose instead of the file's")
    _add_common(p)
    p.set_defaults(handler=cmd_decompose)

    p = sub.add_parser("reconstruct", help="expand a compressed model to an animation")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="error metrics of an approximation")
    p.add_argument("--orig", required=True)
    p.add_argument("--approx", required=True, help="animation or compressed file")
    p.add_argument("--frame", type=int, default=None)
    p.add_argument("--per-vertex", default=None, help="per-vertex error output path")
    _add_common(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("info", help="print header fields of either file type")
    p.add_argument("--file", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_info)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.handler(args)
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.strict and caught and code == 0:
        print("error: warnings treated as failures (--strict)", file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":
    raise SystemExit(main())
