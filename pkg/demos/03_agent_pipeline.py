"""Run the four-agent pipeline with one round of head feedback and audit the trace."""
import tempfile
from pathlib import Path

from pwla_mas.pipeline import HeadPolicy, Pipeline, PipelineConfig, count_reports
from pwla_mas.zones import export_scenario, generate_zones

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    export_scenario(generate_zones(40, 4, seed=1), tmp / "zones.csv", seed=1)
    config = PipelineConfig(
        data=tmp / "zones.csv",
        report_path=tmp / "report.txt",
        head_policy=HeadPolicy.parse("feedback:1"),
    )
    pipeline = Pipeline(config)
    trace = pipeline.run()

    for rec in trace:
        print(rec.to_line())
    print()
    print(f"reports written: {count_reports(trace)}")
    print(f"final approval: {pipeline.report.approval}")
    print(f"audit problems: {pipeline.runtime.audit() or 'none'}")
    print()
    print((tmp / "report.txt").read_text())
