"""Command-line surface: synth, extract, build, train, explain, evaluate.

Every run that writes artifacts also writes a ``run_record.json`` capturing
the resolved configuration, the lexicon hash, and content hashes of the
inputs. Records contain no timestamps and store paths relative to the output
directory, so reruns with identical configuration produce byte-identical
artifact trees.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .concept_model import (
    TargetSpace,
    TrainingConfig,
    predict_scores,
    read_predictor,
    read_scores,
    train_concept_predictor,
    write_predictor,
    write_scores,
)
from .data import (
    DEFAULT_SIDE,
    Label,
    balance,
    filter_manifest,
    load_examples,
    load_image,
    preprocess_image,
    read_manifest,
    split_rows,
    write_split,
)
from .errors import (
    ConceptCxrError,
    DimensionMismatch,
    FileMissing,
    InvalidConfig,
    LexiconMismatch,
)
from .evaluation import (
    empty_truth_count,
    explanation_json,
    explanation_match_rate,
    explanation_text,
    label_metrics,
    metrics_text,
    metrics_to_dict,
    render_explanation,
    report_concept_overlap,
    topk_accuracy_table,
)
from .label_models import (
    DtConfig,
    MlpConfig,
    SvmConfig,
    dump_tree,
    predict_label,
    read_label_model,
    train_dt,
    train_mlp,
    train_svm,
    write_label_model,
)
from .lexicon import load_lexicon
from .reports import (
    annotation_vector,
    load_annotations,
    read_report,
    report_to_vector,
    write_annotations,
)
from .synth import SynthConfig, generate


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_record(out_dir: Path, command: str, config: dict, lexicon_hash: str, inputs) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    def portable(value):
        if isinstance(value, Path):
            return os.path.relpath(value, out_dir)
        return value

    record = {
        "command": command,
        "config": {k: portable(v) for k, v in sorted(config.items())},
        "lexicon_hash": lexicon_hash,
        "inputs": {
            os.path.relpath(str(p), out_dir): _sha256(Path(p)) for p in sorted(inputs, key=str)
        },
        "version": __version__,
    }
    (out_dir / "run_record.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _require_out(args) -> Path:
    if not args.out:
        raise InvalidConfig("--out is required for this command")
    return Path(args.out)


# -- subcommands ------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = _require_out(args)
    config = SynthConfig(
        n_per_class=args.n_per_class,
        image_side=args.side,
        seed=args.seed,
        noise_level=args.noise,
        image_format=args.image_format,
    )
    lexicon = load_lexicon(args.lexicon)
    generate(config, out, lexicon)
    _write_record(
        out,
        "synth",
        {
            "n_per_class": config.n_per_class,
            "image_side": config.image_side,
            "seed": config.seed,
            "noise_level": config.noise_level,
            "image_format": config.image_format,
        },
        lexicon.content_hash(),
        [],
    )
    print(f"synth: wrote {2 * config.n_per_class} examples to {out}")
    return 0


def cmd_extract(args) -> int:
    out = _require_out(args)
    lexicon = load_lexicon(args.lexicon)
    reports_dir = Path(args.reports)
    if not reports_dir.is_dir():
        raise FileMissing(f"reports directory not found: {reports_dir}")
    paths = sorted(reports_dir.glob("*.txt"))
    if not paths:
        print(f"warning: no report files in {reports_dir}", file=sys.stderr)
    rows = []
    for path in paths:
        report = read_report(path)
        rows.append((report.id, report_to_vector(report, lexicon)))
    out.mkdir(parents=True, exist_ok=True)
    write_annotations(out / "extracted.csv", rows, lexicon)
    _write_record(
        out,
        "extract",
        {"reports": Path(reports_dir), "count": len(rows)},
        lexicon.content_hash(),
        [],
    )
    print(f"extract: {len(rows)} reports -> {out / 'extracted.csv'}")
    return 0


def cmd_build(args) -> int:
    out = _require_out(args)
    lexicon = load_lexicon(args.lexicon)
    manifest_path = Path(args.manifest)
    rows = filter_manifest(read_manifest(manifest_path))
    rows = balance(rows, args.seed)
    train_rows, test_rows = split_rows(rows, args.test_fraction, args.seed)

    # validate every kept image now so failures name the offending file
    def check(row):
        try:
            preprocess_image(load_image(row.image_path), args.side)
        except ConceptCxrError as e:
            raise type(e)(f"{row.image_path}: {e.message}") from None

    _parallel_foreach(check, train_rows + test_rows, args.threads)

    write_split(out, train_rows, test_rows, args.seed, args.test_fraction, lexicon.content_hash())
    _write_record(
        out,
        "build",
        {
            "manifest": manifest_path,
            "seed": args.seed,
            "test_fraction": args.test_fraction,
            "side": args.side,
        },
        lexicon.content_hash(),
        [manifest_path],
    )
    print(f"build: train={len(train_rows)} test={len(test_rows)} -> {out}")
    return 0


def _parallel_foreach(fn, items, threads):
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, items))
    else:
        for item in items:
            fn(item)


def _target_space(value: str) -> TargetSpace:
    try:
        return TargetSpace(value)
    except ValueError:
        raise InvalidConfig(f"unknown target space {value!r} (Concepts28 or Clusters6)") from None


def cmd_train(args) -> int:
    out = _require_out(args)
    lexicon = load_lexicon(args.lexicon)
    dataset = Path(args.dataset)
    train_manifest = dataset / "train_manifest.csv"
    test_manifest = dataset / "test_manifest.csv"
    train_rows = read_manifest(train_manifest)
    space = _target_space(args.space)
    out.mkdir(parents=True, exist_ok=True)
    inputs = [train_manifest]

    if args.stage == "concepts":
        config = TrainingConfig(
            batch_size=args.batch, learning_rate=args.lr, epochs=args.epochs, seed=args.seed
        )
        train_examples = load_examples(train_rows, lexicon, args.side, args.threads)
        predictor = train_concept_predictor(train_examples, space, lexicon, config)
        write_predictor(out / "predictor.json", predictor)
        test_rows = read_manifest(test_manifest)
        test_examples = load_examples(test_rows, lexicon, args.side, args.threads)
        score_rows = [(ex.id, predict_scores(predictor, ex.image)) for ex in test_examples]
        write_scores(out / "scores_test.csv", score_rows, lexicon)
        inputs.append(test_manifest)
        print(f"train: concept predictor + {len(score_rows)} test scores -> {out}")
    else:
        data = []
        for row in train_rows:
            vec = report_to_vector(read_report(row.report_path), lexicon)
            features = vec if space is TargetSpace.CONCEPTS else lexicon.to_clusters(vec)
            data.append((features, Label(row.label)))
        if args.model == "dt":
            model = train_dt(data, DtConfig(max_depth=args.max_depth, min_leaf=args.min_leaf))
            names = lexicon.concept_names() if space is TargetSpace.CONCEPTS else lexicon.clusters
            (out / "tree.txt").write_text(dump_tree(model, names), encoding="utf-8")
        elif args.model == "mlp":
            model = train_mlp(
                data,
                MlpConfig(hidden=args.hidden, lr=args.lr_label, epochs=args.epochs_label,
                          batch=args.batch, seed=args.seed),
            )
        elif args.model == "svm":
            model = train_svm(
                data, SvmConfig(C=args.svm_c, lr=args.lr_label, epochs=args.epochs_label, seed=args.seed)
            )
        else:
            raise InvalidConfig(f"unknown model kind {args.model!r}")
        model.lexicon_hash = lexicon.content_hash()
        model.target_space = space.value
        write_label_model(out / "model.json", model)
        print(f"train: {args.model} label model on {len(data)} examples -> {out}")

    _write_record(
        out,
        "train",
        {
            "dataset": dataset,
            "stage": args.stage,
            "model": args.model,
            "space": space.value,
            "seed": args.seed,
            "side": args.side,
        },
        lexicon.content_hash(),
        inputs,
    )
    return 0


def cmd_explain(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    model = read_label_model(args.model)
    if model.lexicon_hash and model.lexicon_hash != lexicon.content_hash():
        raise LexiconMismatch("label model was trained against a different lexicon")

    if args.scores:
        rows = read_scores(args.scores, lexicon)
        wanted = dict(rows)
        if args.id is None:
            raise InvalidConfig("--id is required with --scores")
        if args.id not in wanted:
            raise FileMissing(f"id {args.id!r} not present in {args.scores}")
        image_id, scores = args.id, wanted[args.id]
    elif args.image:
        if not args.predictor:
            raise InvalidConfig("--predictor is required with --image")
        predictor = read_predictor(args.predictor)
        if predictor.lexicon_hash != lexicon.content_hash():
            raise LexiconMismatch("concept predictor was trained against a different lexicon")
        image = preprocess_image(load_image(args.image), args.side)
        image_id = Path(args.image).stem
        scores = predict_scores(predictor, image)
    else:
        raise InvalidConfig("explain needs --image or --scores")

    label, confidence = predict_label(model, scores)
    explanation = render_explanation(image_id, scores, label, confidence, lexicon)
    print(explanation_text(explanation, args.top_n), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "explanations.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(explanation_json(explanation) + "\n")
    return 0


def _parse_k_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidConfig(f"bad k list {text!r}") from None


def cmd_evaluate(args) -> int:
    out = _require_out(args)
    lexicon = load_lexicon(args.lexicon)

    if args.generated_reports or args.truth_reports:
        if not (args.generated_reports and args.truth_reports):
            raise InvalidConfig("overlap mode needs --generated-reports and --truth-reports")
        generated_dir, truth_dir = Path(args.generated_reports), Path(args.truth_reports)
        generated, truth = [], []
        for truth_path in sorted(truth_dir.glob("*.txt")):
            gen_path = generated_dir / truth_path.name
            if not gen_path.is_file():
                raise FileMissing(f"no generated report for {truth_path.name}")
            truth.append(read_report(truth_path))
            generated.append(read_report(gen_path))
        overlap = report_concept_overlap(generated, truth, lexicon)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"concept_overlap": overlap, "pairs": len(truth)}
        (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _write_record(
            out,
            "evaluate",
            {"generated_reports": generated_dir, "truth_reports": truth_dir},
            lexicon.content_hash(),
            [],
        )
        print(f"concept overlap: {overlap:.4f} over {len(truth)} pairs")
        return 0

    score_rows = read_scores(args.scores, lexicon)
    model = read_label_model(args.model)
    if model.lexicon_hash and model.lexicon_hash != lexicon.content_hash():
        raise LexiconMismatch("label model was trained against a different lexicon")
    manifest = {row.id: row for row in read_manifest(args.manifest)}
    annotations = load_annotations(args.annotations)

    space = score_rows[0][1].target_space
    pred_labels, true_labels, preds, truths = [], [], [], []
    for row_id, scores in score_rows:
        if row_id not in manifest:
            raise DimensionMismatch(f"score row {row_id!r} missing from the manifest")
        if row_id not in annotations:
            raise DimensionMismatch(f"score row {row_id!r} missing from the annotations")
        pred_labels.append(predict_label(model, scores)[0])
        true_labels.append(Label(manifest[row_id].label))
        vec = annotation_vector(annotations[row_id], lexicon)
        truths.append(vec if space is TargetSpace.CONCEPTS else lexicon.to_clusters(vec))
        preds.append(scores)

    ks = _parse_k_list(args.k)
    topk = topk_accuracy_table(preds, truths, ks)
    report = label_metrics(
        pred_labels, true_labels, topk=topk, n_empty_truth=empty_truth_count(truths)
    )
    explanations = [
        render_explanation(row_id, scores, pred, 1.0, lexicon)
        for (row_id, scores), pred in zip(score_rows, pred_labels)
    ]
    match_rate = explanation_match_rate(explanations, truths, args.top_n)

    out.mkdir(parents=True, exist_ok=True)
    doc = metrics_to_dict(report)
    doc["explanation_match_rate"] = {str(args.top_n): match_rate}
    (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    text = metrics_text(report) + f"match@{args.top_n}  {match_rate:.4f}\n"
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    _write_record(
        out,
        "evaluate",
        {
            "scores": Path(args.scores),
            "model": Path(args.model),
            "manifest": Path(args.manifest),
            "annotations": Path(args.annotations),
            "k": args.k,
            "top_n": args.top_n,
        },
        lexicon.content_hash(),
        [Path(args.scores), Path(args.model), Path(args.manifest), Path(args.annotations)],
    )
    print(text, end="")
    return 0


# -- argument parsing -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--lexicon", help="lexicon file (default: embedded 28-concept lexicon)")
    shared.add_argument("--seed", type=int, default=0, help="seed for all randomized steps")
    shared.add_argument("--threads", type=int, default=1, help="thread cap for parallel stages")
    shared.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(
        prog="conceptcxr",
        description="Concept-bottleneck lung cancer detection for chest X-rays",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[shared], help="generate the synthetic corpus")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--side", type=int, default=128)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--image-format", choices=["png", "pgm"], default="png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", parents=[shared], help="batch report -> concept vector extraction")
    p.add_argument("--reports", required=True, help="directory of .txt report files")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build", parents=[shared], help="filter/balance/validate/split a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--side", type=int, default=DEFAULT_SIDE)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", parents=[shared], help="train the concept or label stage")
    p.add_argument("--dataset", required=True, help="directory produced by build")
    p.add_argument("--stage", choices=["concepts", "labels"], required=True)
    p.add_argument("--model", choices=["dt", "mlp", "svm"], default="dt")
    p.add_argument("--space", default="Clusters6", help="Concepts28 or Clusters6")
    p.add_argument("--side", type=int, default=DEFAULT_SIDE)
    p.add_argument("--epochs", type=int, default=TrainingConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainingConfig.learning_rate)
    p.add_argument("--batch", type=int, default=TrainingConfig.batch_size)
    p.add_argument("--max-depth", type=int, default=DtConfig.max_depth)
    p.add_argument("--min-leaf", type=int, default=DtConfig.min_leaf)
    p.add_argument("--hidden", type=int, default=MlpConfig.hidden)
    p.add_argument("--epochs-label", type=int, default=MlpConfig.epochs)
    p.add_argument("--lr-label", type=float, default=MlpConfig.lr)
    p.add_argument("--svm-c", type=float, default=SvmConfig.C)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", parents=[shared], help="explain one image or score row")
    p.add_argument("--image", help="chest X-ray image file")
    p.add_argument("--scores", help="score file (bypasses the concept predictor)")
    p.add_argument("--id", help="row id within --scores")
    p.add_argument("--predictor", help="concept predictor JSON (required with --image)")
    p.add_argument("--model", required=True, help="label model JSON")
    p.add_argument("--side", type=int, default=DEFAULT_SIDE)
    p.add_argument("--top-n", type=int, default=3)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", parents=[shared], help="compute metrics")
    p.add_argument("--scores")
    p.add_argument("--model")
    p.add_argument("--manifest")
    p.add_argument("--annotations")
    p.add_argument("--k", default="1,5,10")
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--generated-reports")
    p.add_argument("--truth-reports")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConceptCxrError as e:
        print(f"error category={e.category}: {e.message}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - defensive
        print(f"error category=Internal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
