"""Command-line pipeline: gen-data | corrupt | train-source | adapt |
pseudo-label | evaluate | report.

Every command takes --config; stage outputs default to locations under the
configured work dir so the full recipe can run with almost no flags. All
commands are deterministic given the same inputs and seed; errors come back
as one machine-parsable line on stderr and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from . import evaluation
from .adapt import adapt_teacher_guided, run_ablation, train_source
from .config import RunConfig
from .data import (
    corrupt_dataset_mixed,
    generate_shapes_dataset,
    load_dataset,
    parse_suite,
    save_dataset,
)
from .detector import Detector, load_checkpoint, predict_dataset, save_checkpoint
from .errors import SimrodError
from .pseudolabel import gen_pseudo, save_pseudo

ADAPT_MODES = ("self", "teacher", "bn-adapt", "bn-dmx", "no-ga", "source")


def _config(args) -> RunConfig:
    return RunConfig.load(args.config)


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    out_root = Path(args.out) if args.out else cfg.work_dir / "data"
    for split, domain in (("source_train", "source"), ("target_clean", "source"),
                          ("clean_test", "source")):
        ds = generate_shapes_dataset(cfg.shapes_config(split))
        save_dataset(ds, out_root / split)
        print(f"wrote {split}: {len(ds)} images -> {out_root / split}")
    return 0


def cmd_corrupt(args) -> int:
    cfg = _config(args)
    data_dir = cfg.work_dir / "data"
    src = Path(args.data) if args.data else data_dir / "target_clean"
    out = Path(args.out) if args.out else data_dir / "target_train"
    ds = load_dataset(src)
    corrupted = corrupt_dataset_mixed(
        ds, severity=args.severity if args.severity else cfg["corrupt.severity"],
        rng_seed=cfg.sub_seed("corrupt"), kinds=cfg["corrupt.kinds"])
    save_dataset(corrupted, out)
    print(f"corrupted {len(corrupted)} images -> {out}")
    return 0


def cmd_train_source(args) -> int:
    cfg = _config(args)
    data = Path(args.data) if args.data else cfg.work_dir / "data" / "source_train"
    out = Path(args.out) if args.out else \
        cfg.work_dir / "ckpt" / f"{args.model}_source.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(data, domain="source")
    run_dir = cfg.work_dir / "runs" / f"train_{args.model}"
    train_cfg = cfg.train_config(f"train:{args.model}")
    params, record = train_source(ds, cfg.detector_config(args.model), train_cfg,
                                  run_dir=run_dir)
    best = max((e.val_ap50 for e in record.epochs), default=float("nan"))
    save_checkpoint(params, out, {"role": args.model, "best_val_ap50": best})
    (run_dir / "config.txt").write_text(cfg.snapshot())
    print(f"trained {args.model}: best val AP50 {best:.4f} -> {out}")
    return 0


def cmd_pseudo_label(args) -> int:
    cfg = _config(args)
    data = Path(args.data) if args.data else cfg.work_dir / "data" / "target_train"
    out = Path(args.out) if args.out else cfg.work_dir / "pseudo"
    params, _meta = load_checkpoint(args.checkpoint)
    target = load_dataset(data, domain="target")
    pseudo = gen_pseudo(Detector(params), target,
                        conf_threshold=cfg["adapt.conf_threshold"])
    save_pseudo(pseudo, out)
    print(f"pseudo-labeled {len(target)} images ({pseudo.n_boxes()} boxes) -> {out}")
    return 0


def cmd_adapt(args) -> int:
    cfg = _config(args)
    data_dir = cfg.work_dir / "data"
    source = load_dataset(
        Path(args.source_data) if args.source_data else data_dir / "source_train",
        domain="source")
    target = load_dataset(
        Path(args.target_data) if args.target_data else data_dir / "target_train",
        domain="target")
    student_path = Path(args.student) if args.student else \
        cfg.work_dir / "ckpt" / "student_source.npz"
    student, _ = load_checkpoint(student_path)
    teacher = None
    if args.mode in ("teacher", "no-ga"):
        teacher_path = Path(args.teacher) if args.teacher else \
            cfg.work_dir / "ckpt" / "teacher_source.npz"
        teacher, _ = load_checkpoint(teacher_path)
    run_dir = Path(args.run_dir) if args.run_dir else \
        cfg.work_dir / "runs" / f"adapt_{args.mode}"
    adapt_cfg = cfg.adapt_config(args.mode, f"adapt:{args.mode}")

    def val_transform(val_ds):
        # view the held-out labeled source split through the same shift the
        # target training data went through; target labels stay unused
        return corrupt_dataset_mixed(val_ds, severity=cfg["corrupt.severity"],
                                     rng_seed=cfg.sub_seed("val_corrupt"),
                                     kinds=cfg["corrupt.kinds"])

    result = run_ablation(args.mode, student, source, target, adapt_cfg,
                          teacher_params=teacher, run_dir=run_dir,
                          val_transform=val_transform)
    out = Path(args.out) if args.out else \
        cfg.work_dir / "ckpt" / f"adapted_{args.mode}.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, out, {"mode": args.mode})
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.snapshot())
    print(f"adapted ({args.mode}) -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    data = Path(args.data) if args.data else cfg.work_dir / "data" / "clean_test"
    test = load_dataset(data, domain="source")
    params, _meta = load_checkpoint(args.checkpoint)
    det = Detector(params)

    def predict(ds):
        return predict_dataset(det, ds)

    model_id = params.content_id()
    if args.suite:
        suite = parse_suite(args.suite)
        suite_id = hashlib.sha256(Path(args.suite).read_bytes()).hexdigest()[:12]
        source_report = None
        if args.source_report:
            source_report = evaluation.report_from_json(
                Path(args.source_report).read_text())
        report = evaluation.robustness(predict, test, suite,
                                       rng_seed=cfg.sub_seed("eval_corrupt"),
                                       source_report=source_report,
                                       model_id=model_id, suite_id=suite_id)
    else:
        report = evaluation.clean_only_report(predict, test, model_id=model_id)
    report.extras = {"checkpoint": str(args.checkpoint), "data": str(data)}
    text = evaluation.report_to_json(report)
    out = Path(args.out) if args.out else cfg.work_dir / "reports" / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    sys.stdout.write(evaluation.render_report(report))
    print(f"report -> {out}")
    return 0


def cmd_report(args) -> int:
    report = evaluation.report_from_json(Path(args.report).read_text())
    text = evaluation.render_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simrod",
        description="Domain adaptation pipeline for the tiny grid detector.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("gen-data", cmd_gen_data, help="generate the synthetic datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output root (default: <work_dir>/data)")

    p = add("corrupt", cmd_corrupt, help="corrupt a dataset (mixed kinds, one severity)")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="input dataset dir")
    p.add_argument("--out", help="output dataset dir")
    p.add_argument("--severity", type=int, choices=range(1, 6))

    p = add("train-source", cmd_train_source, help="train a model on source data")
    p.add_argument("--config", required=True)
    p.add_argument("--model", choices=("student", "teacher"), default="student")
    p.add_argument("--data")
    p.add_argument("--out")

    p = add("pseudo-label", cmd_pseudo_label, help="generate and persist pseudo-labels")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data")
    p.add_argument("--out")

    p = add("adapt", cmd_adapt, help="run one adaptation / ablation mode")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", required=True, choices=ADAPT_MODES)
    p.add_argument("--student")
    p.add_argument("--teacher")
    p.add_argument("--source-data")
    p.add_argument("--target-data")
    p.add_argument("--run-dir")
    p.add_argument("--out")

    p = add("evaluate", cmd_evaluate, help="score a checkpoint, optionally over a corruption suite")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data")
    p.add_argument("--suite")
    p.add_argument("--source-report")
    p.add_argument("--out")

    p = add("report", cmd_report, help="re-render a report JSON as the text table")
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SimrodError, OSError, RuntimeError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
