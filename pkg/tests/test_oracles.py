import numpy as np
import pytest

from oracles import brute_best_correct, brute_best_correct_np, label_patterns


def test_label_patterns_use_both_classes():
    pats = list(label_patterns(4))
    assert len(pats) == 14 and all(set(p) == {1, 2} for p in pats)


@pytest.mark.parametrize("n", [3, 5])
def test_vectorized_oracle_agrees_with_loop_oracle(n):
    rng = np.random.default_rng(n)
    for labels in label_patterns(n):
        scores = rng.integers(0, 3, size=n).astype(float).tolist()
        assert brute_best_correct_np(scores, labels) == brute_best_correct(scores, labels)
