"""Acquisition -> modeling -> delivery pipeline with a head that approves or
sends feedback.

One cycle is five dispatches: the acquisition agent ingests data and runs
PWLA, the modeling agent trains and evaluates the classifier, the delivery
agent writes the report and asks the head for approval, and the head's reply
comes back to delivery. A feedback reply starts the next cycle with a revised
attribute selection.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from . import __version__
from .dataset import Dataset, SchemaSelection, format_number, ingest_csv, join_sources, split_train_test
from .errors import BadPolicy, DomainError, SnapshotFormatError
from .pwla import ReductionPolicy, analyze
from .runtime import Plan, Protocol, Runtime, TraceRecord, on_kind, on_message
from .smffnn import classify, evaluate, train
from .zones import CHARTS

REPORT_MAGIC = "#pwla-report v1"
STEPS_PER_CYCLE = 5
PLACEHOLDER_AGENTS = ("staff_management", "facilities_management")

PIPELINE_PROTOCOL = Protocol(
    "pipeline",
    allowed={
        ("inform", "acquisition", "modeling"),
        ("request", "acquisition", "modeling"),
        ("inform", "modeling", "acquisition"),
        ("report", "acquisition", "delivery"),
        ("report", "modeling", "delivery"),
        ("request", "delivery", "head"),
        ("approve", "head", "delivery"),
        ("feedback", "head", "delivery"),
        ("feedback", "delivery", "acquisition"),
    },
    requires_reply={"request"},
)


@dataclass(frozen=True)
class HeadPolicy:
    """Scripted head decisions: ``decisions[i]`` answers cycle ``i + 1``,
    later cycles get ``default``."""

    decisions: tuple = ()
    default: str = "approve"

    def __post_init__(self):
        object.__setattr__(self, "decisions", tuple(self.decisions))
        for d in (*self.decisions, self.default):
            if d not in ("approve", "feedback"):
                raise BadPolicy(f"unknown head decision {d!r}")

    @classmethod
    def parse(cls, text: str) -> "HeadPolicy":
        """``approve``, ``feedback`` (always) or ``feedback:N`` (N times, then approve)."""
        kind, _, arg = text.partition(":")
        if kind == "approve" and not arg:
            return cls()
        if kind == "feedback" and not arg:
            return cls(default="feedback")
        if kind == "feedback":
            return cls(("feedback",) * int(arg))
        raise BadPolicy(f"cannot parse head policy {text!r}")

    def decide(self, cycle: int) -> str:
        return self.decisions[cycle - 1] if cycle <= len(self.decisions) else self.default


@dataclass(frozen=True)
class PipelineConfig:
    data: object  # path, or mapping of source tag -> path
    report_path: object
    selection: SchemaSelection | None = None
    reduction: ReductionPolicy = field(default_factory=ReductionPolicy)
    test_fraction: float = 0.3
    seed: int = 0
    head_policy: HeadPolicy = field(default_factory=HeadPolicy)
    max_cycles: int = 3

    def echo(self) -> dict:
        sel = self.selection
        return {
            "selection": None if sel is None else list(sel.selected),
            "label_column": None if sel is None else sel.label_column,
            "reduction": str(self.reduction),
            "test_fraction": self.test_fraction,
            "seed": self.seed,
            "head_policy": list(self.head_policy.decisions) + [f"*{self.head_policy.default}"],
            "max_cycles": self.max_cycles,
        }


@dataclass
class Report:
    run_id: str
    cycle: int
    status: str = "ok"
    weights: tuple = ()  # (name, weight, strong)
    threshold: float | None = None
    orientation: str | None = None
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    assignments: tuple = ()  # (id, score, class)
    recommendations: tuple = tuple((c, *CHARTS[c]) for c in (1, 2))
    approval: str = "pending"

    def to_text(self) -> str:
        def num(x):
            return "-" if x is None else format_number(x)

        out = [REPORT_MAGIC, "[header]", f"run_id\t{self.run_id}", f"cycle\t{self.cycle}", f"status\t{self.status}"]
        out += ["[weights]", "name\tweight\tstrong"]
        out += [f"{n}\t{format_number(w)}\t{int(s)}" for n, w, s in self.weights]
        out += [
            "[model]",
            f"threshold\t{num(self.threshold)}",
            f"orientation\t{self.orientation or '-'}",
            f"train_accuracy\t{num(self.train_accuracy)}",
            f"test_accuracy\t{num(self.test_accuracy)}",
        ]
        out += ["[assignments]", "id\tscore\tclass"]
        out += [f"{i}\t{format_number(s)}\t{c}" for i, s, c in self.assignments]
        out += ["[recommendations]", "class\tchart\tdescription"]
        out += [f"{c}\t{chart}\t{desc}" for c, chart, desc in self.recommendations]
        out += ["[approval]", f"status\t{self.approval}"]
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Report":
        lines = text.splitlines()
        if not lines or lines[0] != REPORT_MAGIC:
            raise SnapshotFormatError("not a report file")
        sections: dict[str, list[list[str]]] = {}
        current = None
        for line in lines[1:]:
            if line.startswith("[") and line.endswith("]"):
                current = sections.setdefault(line[1:-1], [])
            elif current is not None:
                current.append(line.split("\t"))

        def kv(name):
            return {row[0]: row[1] for row in sections.get(name, [])}

        def num(x):
            return None if x == "-" else float(x)

        header, model, approval = kv("header"), kv("model"), kv("approval")
        return cls(
            run_id=header["run_id"],
            cycle=int(header["cycle"]),
            status=header["status"],
            weights=tuple((n, float(w), s == "1") for n, w, s in sections["weights"][1:]),
            threshold=num(model["threshold"]),
            orientation=None if model["orientation"] == "-" else model["orientation"],
            train_accuracy=num(model["train_accuracy"]),
            test_accuracy=num(model["test_accuracy"]),
            assignments=tuple((i, float(s), int(c)) for i, s, c in sections["assignments"][1:]),
            recommendations=tuple((int(c), ch, d) for c, ch, d in sections["recommendations"][1:]),
            approval=approval["status"],
        )


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_id_for(config: PipelineConfig) -> str:
    h = hashlib.sha256()
    h.update(repr(sorted(config.echo().items())).encode())
    for tag, path in _sources(config.data):
        h.update(f"{tag}:{_file_digest(path)}".encode())
    h.update(__version__.encode())
    return h.hexdigest()[:12]


def _sources(data) -> list[tuple[str, Path]]:
    if isinstance(data, Mapping):
        return sorted((str(tag), Path(p)) for tag, p in data.items())
    return [("data", Path(data))]


def load_data(data, selection: SchemaSelection | None) -> Dataset:
    """Ingest one file, or inner-join several ``tag -> path`` sources."""
    if not isinstance(data, Mapping):
        return ingest_csv(data, selection)
    tables = [(tag, ingest_csv(path)) for tag, path in _sources(data)]
    return join_sources(tables, selection)


def revise_selection(report: Report) -> tuple[str, ...]:
    """Head feedback: narrow the selection to the attributes found strong."""
    return tuple(name for name, _, strong in report.weights if strong)


class Pipeline:
    """Head, acquisition, modeling and delivery agents on one runtime."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.run_id = run_id_for(config)
        self.reports: list[Report] = []
        self.runtime = Runtime(PIPELINE_PROTOCOL)
        rt = self.runtime
        rt.register_agent("head", "head", self._head_plans())
        rt.register_agent("acquisition", "acquisition", self._acquisition_plans(), belief_view=("data/", "rules/"))
        rt.register_agent("modeling", "modeling", self._modeling_plans(), belief_view=("data/", "model/"))
        rt.register_agent("delivery", "delivery", self._delivery_plans())
        for name in PLACEHOLDER_AGENTS:
            rt.register_agent(name, "placeholder", ())

    # acquisition -----------------------------------------------------------

    def _acquisition_plans(self):
        return (
            Plan("acquire", on_kind("percept_arrived"), (self._acquire,), goal="prepare inputs"),
            Plan("reacquire", on_message("feedback", "delivery"), (self._acquire,), goal="prepare inputs"),
        )

    def _acquire(self, ctx):
        cycle = ctx.state["cycle"] = ctx.state.get("cycle", 0) + 1
        payload = ctx.event.payload if ctx.message is None else ctx.message.payload
        selected = (payload or {}).get("selected")
        base = self.config.selection
        if selected:
            label = base.label_column if base is not None else "label"
            selection = SchemaSelection(tuple(selected), label_column=label)
        else:
            selection = base
        try:
            ds = load_data(self.config.data, selection)
            result = analyze(ds, self.config.reduction)
        except DomainError as exc:
            ctx.send("delivery", "report", {"status": f"failed: {exc.name}", "detail": str(exc), "cycle": cycle})
            return f"failure {exc.name}"
        ctx.update_belief("data/dataset", ds)
        ctx.update_belief("data/normalized", result.normalized)
        ctx.update_belief("data/weights", result.weights)
        ctx.send("modeling", "inform", {"normalized": result.projected, "weights": result.weights, "cycle": cycle})
        return f"pwla n={ds.n} d={ds.d} strong={len(result.weights.strong)}"

    # modeling ------------------------------------------------------------

    def _modeling_plans(self):
        return (
            Plan("classify", on_message("inform", "acquisition"), (self._model,), goal="classify instances"),
            Plan("status", on_message("request"), (self._status,), goal="answer queries"),
        )

    def _model(self, ctx):
        payload = ctx.message.payload
        ds: Dataset = ctx.belief("data/dataset")
        nm, pw = payload["normalized"], payload["weights"]
        try:
            if self.config.test_fraction > 0:
                train_ds, test_ds = split_train_test(ds, self.config.test_fraction, self.config.seed)
            else:
                train_ds, test_ds = ds, ds
            pos = {rid: i for i, rid in enumerate(ds.instance_ids)}
            rows = [pos[rid] for rid in train_ds.instance_ids]
            model = train(nm.take_rows(rows), pw, train_ds.labels)
            ev = evaluate(model, test_ds)
        except DomainError as exc:
            ctx.send("delivery", "report", {"status": f"failed: {exc.name}", "detail": str(exc), "cycle": payload["cycle"]})
            return f"failure {exc.name}"
        scores, preds = classify(model, ds.select(model.attribute_names).values)
        version = ctx.update_belief("model/current", model)
        ctx.send(
            "delivery",
            "report",
            {
                "status": "ok",
                "cycle": payload["cycle"],
                "model": model,
                "evaluation": ev,
                "weights": pw,
                "assignments": tuple(zip(ds.instance_ids, scores.tolist(), preds.tolist())),
            },
        )
        return f"trained v{version} train_acc={model.train_accuracy:.4f} test_acc={ev.accuracy:.4f}"

    def _status(self, ctx):
        model = ctx.belief("model/current")
        ctx.reply("inform", {"trained": model is not None})
        return "status"

    # delivery ------------------------------------------------------------

    def _delivery_plans(self):
        return (
            Plan("deliver", on_message("report"), (self._deliver,), goal="report to head"),
            Plan("approved", on_message("approve", "head"), (self._approved,), goal="activate plan"),
            Plan("revise", on_message("feedback", "head"), (self._feedback,), goal="close feedback loop"),
        )

    def _write(self, report: Report) -> str | None:
        try:
            Path(self.config.report_path).write_text(report.to_text(), encoding="utf-8")
        except OSError as exc:
            return f"write_failed {type(exc).__name__}"
        return None

    def _deliver(self, ctx):
        p = ctx.message.payload
        if p["status"] != "ok":
            report = Report(self.run_id, p["cycle"], status=p["status"], approval="not-requested")
            self.reports.append(report)
            return self._write(report) or f"report written cycle={report.cycle} status={report.status}"
        model, pw = p["model"], p["weights"]
        strong = set(pw.strong)
        report = Report(
            run_id=self.run_id,
            cycle=p["cycle"],
            weights=tuple((n, float(pw.w[j]), j in strong) for j, n in enumerate(pw.attribute_names)),
            threshold=model.threshold,
            orientation=model.orientation,
            train_accuracy=model.train_accuracy,
            test_accuracy=p["evaluation"].accuracy,
            assignments=tuple((i, float(s), int(c)) for i, s, c in p["assignments"]),
        )
        self.reports.append(report)
        ctx.state["report"] = report
        failed = self._write(report)
        payload = {"run_id": report.run_id, "cycle": report.cycle}
        if failed:
            payload["inline_report"] = report.to_text()
        ctx.send("head", "request", payload)
        return failed or f"report written cycle={report.cycle}"

    def _approved(self, ctx):
        report = replace(ctx.state["report"], approval="approved")
        self.reports[-1] = ctx.state["report"] = report
        ctx.update_belief(
            "rules/active-plan",
            {
                "run_id": report.run_id,
                "cycle": report.cycle,
                "attributes": revise_selection(report),
                "threshold": report.threshold,
                "orientation": report.orientation,
                "charts": {c: chart for c, chart, _ in report.recommendations},
            },
        )
        return self._write(report) or f"approved cycle={report.cycle}"

    def _feedback(self, ctx):
        report = replace(ctx.state["report"], approval="feedback")
        self.reports[-1] = ctx.state["report"] = report
        failed = self._write(report)
        ctx.send("acquisition", "feedback", ctx.message.payload)
        return failed or f"feedback cycle={report.cycle}"

    # head ------------------------------------------------------------------

    def _head_plans(self):
        return (Plan("review", on_message("request", "delivery"), (self._review,), goal="confirm plans"),)

    def _review(self, ctx):
        cycle = ctx.message.payload["cycle"]
        decision = self.config.head_policy.decide(cycle)
        if decision == "approve":
            ctx.reply("approve", {"cycle": cycle})
        else:
            ctx.reply("feedback", {"cycle": cycle, "selected": revise_selection(self.reports[-1])})
        return f"{decision} cycle={cycle}"

    # driving ---------------------------------------------------------------

    def run(self) -> list[TraceRecord]:
        """Inject the initial percept and run to quiescence.

        The step budget is ``STEPS_PER_CYCLE * max_cycles``, so a head that
        keeps sending feedback raises :class:`StepLimitExceeded`.
        """
        sel = self.config.selection
        self.runtime.inject_percept("acquisition", {"selected": None if sel is None else sel.selected})
        return self.runtime.run_until_quiescent(STEPS_PER_CYCLE * self.config.max_cycles)

    @property
    def report(self) -> Report | None:
        return self.reports[-1] if self.reports else None


def run_pipeline(config: PipelineConfig) -> tuple[Report, list[TraceRecord]]:
    pipeline = Pipeline(config)
    trace = pipeline.run()
    return pipeline.report, trace


def count_reports(trace) -> int:
    """Number of reports the delivery agent produced in ``trace``."""
    return sum(
        1 for rec in trace if rec.agent == "delivery" and rec.performative == "report"
    )
