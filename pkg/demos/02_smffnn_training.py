"""Train the one-epoch classifier on a generated scenario and score held-out zones."""
from pwla_mas import evaluate, fit, split_train_test
from pwla_mas.zones import generate_zones, zones_to_dataset

ds = zones_to_dataset(generate_zones(60, 6, seed=3))
train_ds, test_ds = split_train_test(ds, 0.3, seed=3)

model = fit(train_ds)
print("attributes kept:", ", ".join(model.attribute_names))
print(f"threshold {model.threshold:.4f} ({model.orientation})")
print(f"training accuracy {model.train_accuracy:.3f}")

ev = evaluate(model, test_ds)
print(f"held-out accuracy {ev.accuracy:.3f} on {test_ds.n} zones")
print("confusion (rows true 1/2, cols predicted 1/2):")
print(ev.confusion)

# the snapshot is plain text and round-trips exactly
text = model.to_text()
print(text.splitlines()[0], f"({len(text.splitlines())} lines)")
