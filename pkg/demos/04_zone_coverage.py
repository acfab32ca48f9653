"""Classify zones, then assign each depended zone to its nearest main zone."""
from pwla_mas.smffnn import classify, fit
from pwla_mas.zones import CHARTS, generate_zones, plan_coverage, zones_to_dataset

zones = generate_zones(25, 3, seed=7)
ds = zones_to_dataset(zones)
model = fit(ds)
_, predicted = classify(model, ds.select(model.attribute_names).values)
labels = dict(zip(ds.instance_ids, predicted.tolist()))

plan = plan_coverage(zones, labels)
for cls, (chart, text) in CHARTS.items():
    members = [z for z, c in plan.chart.items() if c == chart]
    print(f"chart {chart} ({text}): {len(members)} zones")

by_main = {}
for dep, main in plan.assignments.items():
    by_main.setdefault(main, []).append(dep)
for main in sorted(by_main):
    print(f"{main} serves {', '.join(sorted(by_main[main]))}")
