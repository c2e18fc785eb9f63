"""Command-line entry point: ``cxrtasks <command> ...``.

Exit status is 0 on success, 1 when ``validate`` finds violations, and 2 on
any error, which is printed as ``error [stage]: message``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .codec import encode_box, render_tokens
from .core import BBox, ImageInfo, load_manifest, validate_manifest
from .datasets import TASKS, SplitAssignment, build_task, read_records, split_images, write_records
from .evaluation import evaluate, read_predictions, write_predictions, write_report, round_floats
from .harness import OracleConfig, PipelineRun, StageError, predict_records, run_pipeline
from .mixture import build_schedule, compute_weights
from .parsing import parse_output


def _image_size(text: str) -> ImageInfo:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return ImageInfo.canvas(w, h)


def _sizes(text: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        name, _, n = part.partition("=")
        out[name.strip()] = int(n)
    return out


def cmd_validate(args) -> int:
    violations = validate_manifest(load_manifest(args.manifest))
    for v in violations:
        print(v)
    if not violations:
        print("ok")
    return 1 if violations else 0


def cmd_split(args) -> int:
    split = split_images(load_manifest(args.manifest), args.seed)
    text = json.dumps(split.to_dict(), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(json.dumps(split.sizes()))
    else:
        sys.stdout.write(text)
    return 0


def cmd_build(args) -> int:
    manifest = load_manifest(args.manifest)
    split = SplitAssignment.from_dict(json.loads(Path(args.split_file).read_text()))
    tasks = TASKS if args.task == "all" else (args.task,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        records = build_task(task, manifest, split, args.vqa_seed)
        for s in sorted({r.split for r in records}):
            write_records([r for r in records if r.split == s], out / f"{task}.{s}.jsonl")
        print(f"{task}: {len(records)} records")
    return 0


def cmd_schedule(args) -> int:
    if args.sizes:
        sizes = _sizes(args.sizes)
        ids = None
    else:
        ids = {}
        for path in args.records:
            for r in read_records(path):
                ids.setdefault(r.task, []).append(r.record_id)
        sizes = {t: len(v) for t, v in ids.items()}
    weights = compute_weights(sizes)
    schedule = build_schedule(weights, sizes, args.batch_size, args.batches, args.seed, args.epoch)
    lines = []
    for e in schedule.entries:
        rec = list(e.record_ids) if ids is None else [ids[e.task][i] for i in e.record_ids]
        lines.append(json.dumps({"step": e.step, "task": e.task, "record_ids": rec}))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"ratio {weights.ratio_string()} counts {schedule.counts()}", file=sys.stderr)
    return 0


def cmd_encode_box(args) -> int:
    y0, x0, y1, x1 = (float(v) for v in args.box.split(","))
    print(render_tokens(encode_box(BBox(y0, x0, y1, x1), args.image)))
    return 0


def cmd_decode(args) -> int:
    parsed = parse_output(args.task, args.line, args.image)
    payload = parsed.payload
    if isinstance(payload, list):
        payload = [
            {"label": p.label, "box": list(p.box.as_tuple()), **({"mask_pixels": p.mask.count} if hasattr(p, "mask") else {})}
            for p in payload
        ]
    elif hasattr(payload, "text"):
        payload = payload.text
    print(json.dumps(round_floats({"task": parsed.task, "payload": payload, "diagnostics": list(parsed.diagnostics)})))
    return 0


def _oracle_config(args) -> OracleConfig:
    return OracleConfig(
        mode=args.oracle_mode if hasattr(args, "oracle_mode") else args.mode,
        drop_prob=args.drop_prob,
        jitter_bins=args.jitter_bins,
        garble_prob=args.garble_prob,
        answer_flip_prob=args.answer_flip_prob,
        seed=args.oracle_seed if hasattr(args, "oracle_seed") else args.seed,
    )


def cmd_oracle(args) -> int:
    records = [r for path in args.records for r in read_records(path)]
    preds = predict_records(records, None, _oracle_config(args))
    if args.out:
        write_predictions(preds, args.out)
    else:
        for p in preds:
            print(json.dumps(p))
    return 0


def cmd_eval(args) -> int:
    records = [r for path in args.records for r in read_records(path)]
    manifest = load_manifest(args.manifest) if args.manifest else None
    report = evaluate(records, read_predictions(args.predictions), manifest)
    write_report(report, args.out)
    print(json.dumps(round_floats(report), indent=1))
    return 0


def cmd_run(args) -> int:
    run = PipelineRun(
        manifest_path=args.manifest,
        out_dir=args.out_dir,
        seed=args.seed,
        oracle=_oracle_config(args),
        batch_size=args.batch_size,
        epoch_batches=args.batches,
    )
    report, _ = run_pipeline(run)
    print(json.dumps(round_floats(report), indent=1))
    return 0


def _add_corruption(p: argparse.ArgumentParser) -> None:
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--jitter-bins", type=int, default=0)
    p.add_argument("--garble-prob", type=float, default=0.0)
    p.add_argument("--answer-flip-prob", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cxrtasks", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check manifest invariants")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_validate, stage="validate")

    p = sub.add_parser("split", help="8:1:1 image-level split")
    p.add_argument("manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_split, stage="split")

    p = sub.add_parser("build", help="derive task datasets as JSONL")
    p.add_argument("manifest")
    p.add_argument("--split-file", required=True)
    p.add_argument("--task", default="all", choices=("all",) + TASKS)
    p.add_argument("--out", required=True)
    p.add_argument("--vqa-seed", type=int, default=0)
    p.set_defaults(func=cmd_build, stage="build")

    p = sub.add_parser("schedule", help="mixture schedule for one epoch")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--sizes", help="task=count,... pairs")
    src.add_argument("--records", nargs="+", help="record JSONL files")
    p.add_argument("--batches", type=int, required=True, help="batches per epoch")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule, stage="schedule")

    p = sub.add_parser("encode-box", help="pixel box to location tokens")
    p.add_argument("--image", type=_image_size, required=True, help="WxH")
    p.add_argument("--box", required=True, help="y0,x0,y1,x1")
    p.set_defaults(func=cmd_encode_box, stage="encode")

    p = sub.add_parser("decode", help="parse one raw model output")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--line", required=True)
    p.add_argument("--image", type=_image_size, default=ImageInfo.canvas(1000, 1000), help="WxH")
    p.set_defaults(func=cmd_decode, stage="decode")

    p = sub.add_parser("oracle", help="oracle predictions for record files")
    p.add_argument("records", nargs="+")
    p.add_argument("--mode", default="perfect", choices=("perfect", "corrupted"))
    p.add_argument("--seed", type=int, default=0)
    _add_corruption(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle, stage="oracle")

    p = sub.add_parser("eval", help="score predictions against gold records")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", help="use annotation geometry as gold")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval, stage="eval")

    p = sub.add_parser("run", help="end-to-end pipeline with the oracle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-mode", default="perfect", choices=("perfect", "corrupted"))
    p.add_argument("--oracle-seed", type=int, default=0)
    _add_corruption(p)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--batches", type=int, help="batches per epoch (default: one pass)")
    p.set_defaults(func=cmd_run, stage="run")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, TypeError) as exc:
        print(f"error [{args.stage}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
