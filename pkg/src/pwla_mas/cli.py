"""Command-line entry point.

Exit codes: 0 success, 2 domain error (the error class name is printed to
stderr), 3 step limit exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import SchemaSelection, default_selection, ingest_csv, split_train_test
from .errors import DimensionMismatch, DomainError, MissingColumn, StepLimitExceeded
from .pipeline import HeadPolicy, Pipeline, PipelineConfig, count_reports
from .pwla import ReductionPolicy, analyze, weights_snapshot
from .runtime import export_trace
from .smffnn import SmffnnModel, classify, evaluate, fit
from .zones import export_scenario, generate_zones, scenario_selection

EXIT_OK, EXIT_DOMAIN, EXIT_LIMIT = 0, 2, 3


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command, config, inputs, outputs) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
        "version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def verify_manifest(path) -> bool:
    """True when every recorded digest still matches its file."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    recorded = {**manifest["inputs"], **manifest["outputs"]}
    return all(Path(p).exists() and _digest(p) == d for p, d in recorded.items())


def _selection(args) -> SchemaSelection:
    label = getattr(args, "label", None)
    if args.select:
        return SchemaSelection(tuple(s.strip() for s in args.select.split(",") if s.strip()), label_column=label)
    return default_selection(args.data, label_column=label or "label")


def _header(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#") and line.strip():
                return [h.strip() for h in line.rstrip("\n").split(",")]
    return []


def cmd_weights(args, out):
    ds = ingest_csv(args.data, _selection(args))
    result = analyze(ds, ReductionPolicy.parse(args.policy))
    pw = result.weights
    strong = set(pw.strong)
    rows = sorted(
        ((name, float(pw.w[j]), j in strong) for j, name in enumerate(pw.attribute_names)),
        key=lambda r: (-r[1], r[0]),
    )
    print(f"{'attribute':<24} {'weight':>16} {'strong':>6}", file=out)
    for name, w, s in rows:
        print(f"{name:<24} {w:>16.6f} {'yes' if s else 'no':>6}", file=out)
    snapshot = Path(args.snapshot) if args.snapshot else Path(args.data).with_suffix(".weights.txt")
    snapshot.write_text(weights_snapshot(result.normalized, pw), encoding="utf-8")
    return [args.data], [snapshot], {"policy": str(pw.policy), "select": args.select}


def cmd_train(args, out):
    ds = ingest_csv(args.data, _selection(args))
    policy = ReductionPolicy.parse(args.policy)
    if args.test_fraction > 0:
        train_ds, test_ds = split_train_test(ds, args.test_fraction, args.seed)
    else:
        train_ds = test_ds = ds
    model = fit(train_ds, policy)
    ev = evaluate(model, test_ds)
    Path(args.out).write_text(model.to_text(), encoding="utf-8")
    print(f"attributes      {','.join(model.attribute_names)}", file=out)
    print(f"threshold       {model.threshold:.6f}", file=out)
    print(f"orientation     {model.orientation}", file=out)
    print(f"train_accuracy  {model.train_accuracy:.3f}", file=out)
    print(f"test_accuracy   {ev.accuracy:.3f}", file=out)
    print(f"accuracy        {ev.accuracy:.3f}", file=out)
    config = {"label": args.label, "test_fraction": args.test_fraction, "seed": args.seed, "policy": str(policy)}
    return [args.data], [args.out], config


def cmd_classify(args, out):
    model = SmffnnModel.from_text(Path(args.model).read_text(encoding="utf-8"))
    try:
        ds = ingest_csv(args.data, SchemaSelection(model.attribute_names))
    except MissingColumn:
        raise DimensionMismatch(model.d, len([h for h in _header(args.data) if h not in ("id", "label")])) from None
    scores, preds = classify(model, ds.values)
    lines = [f"{'id':<16} {'score':>16} {'class':>5}"]
    lines += [f"{rid:<16} {s:>16.6f} {c:>5d}" for rid, s, c in zip(ds.instance_ids, scores, preds)]
    text = "\n".join(lines) + "\n"
    out.write(text)
    outputs = []
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        outputs.append(args.out)
    return [args.model, args.data], outputs, {}


def cmd_pipeline(args, out):
    trace_path = Path(args.trace)
    report_path = Path(args.report) if args.report else trace_path.with_name(trace_path.stem + ".report.txt")
    config = PipelineConfig(
        data=args.scenario,
        report_path=report_path,
        selection=scenario_selection() if args.select is None else SchemaSelection(
            tuple(args.select.split(",")), label_column="label"
        ),
        reduction=ReductionPolicy.parse(args.policy),
        test_fraction=args.test_fraction,
        seed=args.seed,
        head_policy=HeadPolicy.parse(args.head_policy),
        max_cycles=args.max_cycles,
    )
    pipeline = Pipeline(config)
    try:
        trace = pipeline.run()
    except StepLimitExceeded as exc:
        trace_path.write_text(export_trace(exc.trace), encoding="utf-8")
        print(f"reports {count_reports(exc.trace)}", file=out)
        raise
    trace_path.write_text(export_trace(trace), encoding="utf-8")
    report = pipeline.report
    print(f"run_id          {report.run_id}", file=out)
    print(f"cycles          {report.cycle}", file=out)
    print(f"reports         {count_reports(trace)}", file=out)
    print(f"status          {report.status}", file=out)
    print(f"approval        {report.approval}", file=out)
    if report.test_accuracy is not None:
        print(f"test_accuracy   {report.test_accuracy:.3f}", file=out)
    return [args.scenario], [report_path, trace_path], config.echo()


def cmd_scenario(args, out):
    zones = generate_zones(args.n, args.main, args.seed)
    export_scenario(zones, args.out, seed=args.seed)
    print(f"zones {len(zones)} main {sum(z.label == 1 for z in zones)} -> {args.out}", file=out)
    return [], [args.out], {"n": args.n, "main": args.main, "seed": args.seed}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwla-mas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--manifest", help="write a JSON run manifest to this path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="potential weights of the selected attributes")
    p.add_argument("--data", required=True)
    p.add_argument("--select", help="comma-separated attribute names")
    p.add_argument("--label", help="class column to exclude from the attributes")
    p.add_argument("--policy", default="mean", help="mean | topk:K | frac:T")
    p.add_argument("--snapshot", help="weights snapshot path (default: DATA.weights.txt)")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("train", help="train and evaluate the classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--select")
    p.add_argument("--policy", default="mean")
    p.add_argument("--test-fraction", type=float, default=0.3, help="0 trains on all data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model snapshot path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label instances with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("pipeline", help="run the agent pipeline on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--head-policy", default="approve", help="approve | feedback | feedback:N")
    p.add_argument("--trace", required=True)
    p.add_argument("--report")
    p.add_argument("--select")
    p.add_argument("--policy", default="mean")
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-cycles", type=int, default=3)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("scenario", help="generate a synthetic zone scenario")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--main", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        inputs, outputs, config = args.func(args, out)
    except StepLimitExceeded as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except DomainError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.manifest:
        write_manifest(args.manifest, args.command, config, inputs, outputs)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
