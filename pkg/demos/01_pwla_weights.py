"""Potential weights on a small hand-made table.

Four attributes, one of them constant and one with a tiny raw range. The
constant column gets weight zero. The tiny-range column is not light:
min-max scaling removes units, so only the shape of its spread counts. The
mean-threshold rule keeps columns whose deviation mass is at least the
average over non-constant columns.
"""
import numpy as np

from pwla_mas import AttributeSpec, Dataset, ReductionPolicy, analyze, rank

values = np.array(
    [
        [120.0, 3.0, 7.0, 0.50],
        [340.0, 9.0, 7.0, 0.52],
        [80.0, 1.0, 7.0, 0.49],
        [910.0, 4.0, 7.0, 0.51],
        [450.0, 8.0, 7.0, 0.50],
    ]
)
names = ("population", "clinics", "region_code", "ratio")
ds = Dataset(tuple(AttributeSpec(n) for n in names), tuple(f"r{i}" for i in range(5)), values)

for policy in (ReductionPolicy.mean_threshold(), ReductionPolicy.top_k(1), ReductionPolicy.fraction_of_max(0.5)):
    result = analyze(ds, policy)
    pw = result.weights
    print(f"policy {policy}")
    print(f"  global mean of the normalized matrix: {result.normalized.global_mean:.4f}")
    for j in rank(pw.w):
        mark = "strong" if j in pw.strong else "weak"
        print(f"  {names[j]:<12} {pw.w[j]:8.4f}  {mark}")
    print(f"  projected matrix shape: {result.projected.shape}")
