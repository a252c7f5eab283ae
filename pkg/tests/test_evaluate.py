"""Metrics, constrained decoding, and report consistency."""

import numpy as np
import pytest

from conftest import make_case, one_hot, random_probs
from spineid.domain import ConfidenceState
from spineid.errors import ValidationError
from spineid.evaluate import constrained_decode, decode_states, evaluate, id_rate, label_mse
from spineid.labels import N_CLASSES


def oracle_best_window(states) -> list[int]:
    """Exhaustive window search maximizing the product of picked probabilities."""
    k = len(states)
    best_start, best_score = 0, -1.0
    for start in range(N_CLASSES - k + 1):
        score = np.longdouble(1.0)
        for i, s in enumerate(states):
            score *= np.longdouble(s.probs[start + i])
        if score > best_score:
            best_start, best_score = start, score
    return list(range(best_start, best_start + k))


class TestIdRate:
    def test_perfect(self):
        assert id_rate([7, 8, 9], [7, 8, 9]) == 1.0

    def test_one_wrong_of_four(self):
        assert id_rate([1, 2, 3, 5], [1, 2, 3, 4]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            id_rate([1], [1, 2])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            id_rate([], [])


class TestLabelMse:
    def test_identical(self):
        assert label_mse([4, 5, 6], [4, 5, 6]) == 0.0

    def test_all_off_by_one(self):
        assert label_mse([5, 6, 7], [4, 5, 6]) == 1.0

    def test_third(self):
        assert label_mse([7, 9, 9], [7, 8, 9]) == pytest.approx(1 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            label_mse([1, 2], [1])


class TestConstrainedDecode:
    def test_one_hot_consecutive_recovered(self):
        states = [ConfidenceState(one_hot(i)) for i in range(9, 13)]
        assert constrained_decode(states) == [9, 10, 11, 12]

    def test_full_spine_forced_to_identity_window(self):
        rng = np.random.default_rng(1)
        states = [ConfidenceState(p) for p in random_probs(rng, 24)]
        assert constrained_decode(states) == list(range(24))

    def test_too_many_vertebrae_rejected(self):
        rng = np.random.default_rng(2)
        states = [ConfidenceState(p) for p in random_probs(rng, 25)]
        with pytest.raises(ValidationError):
            constrained_decode(states)

    def test_matches_exhaustive_window_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            k = int(rng.integers(1, 7))
            states = [ConfidenceState(p) for p in random_probs(rng, k)]
            assert constrained_decode(states) == oracle_best_window(states)

    def test_output_always_consecutive(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            k = int(rng.integers(1, 15))
            states = [ConfidenceState(p) for p in random_probs(rng, k)]
            out = constrained_decode(states)
            assert out == list(range(out[0], out[0] + k))

    def test_decode_states_modes(self):
        states = [ConfidenceState(one_hot(3)), ConfidenceState(one_hot(7))]
        assert decode_states(states, "argmax") == [3, 7]
        assert decode_states(states, "constrained") != [3, 7]
        with pytest.raises(ValidationError):
            decode_states(states, "viterbi")


class TestEvaluate:
    def test_perfect_predictions(self):
        cases = [make_case([one_hot(5), one_hot(6)], truths=[5, 6], case_id="a")]
        rep = evaluate(cases, [[5, 6]])
        assert rep.id_rate == 1.0
        assert rep.mse == 0.0
        assert rep.per_class_confusion[5, 5] == 1
        assert rep.per_class_confusion.sum() == 2
        assert np.trace(rep.per_class_confusion) == 2

    def test_accepts_confidence_states(self):
        cases = [make_case([one_hot(5), one_hot(6)], truths=[5, 6])]
        rep = evaluate(cases, [[ConfidenceState(one_hot(5)), ConfidenceState(one_hot(7))]])
        assert rep.id_rate == 0.5
        assert rep.per_class_confusion[6, 7] == 1

    def test_confusion_row_sums_are_truth_counts(self):
        rng = np.random.default_rng(5)
        cases, preds = [], []
        for i in range(10):
            k = int(rng.integers(2, 6))
            start = int(rng.integers(0, 24 - k + 1))
            cases.append(make_case([one_hot(t) for t in range(start, start + k)],
                                   truths=list(range(start, start + k)), case_id=f"c{i}"))
            preds.append([int(rng.integers(0, 24)) for _ in range(k)])
        rep = evaluate(cases, preds)
        truth_counts = np.zeros(24, dtype=int)
        for case in cases:
            for t in case.truths:
                truth_counts[t.index] += 1
        assert np.array_equal(rep.per_class_confusion.sum(axis=1), truth_counts)
        assert rep.id_rate == pytest.approx(np.trace(rep.per_class_confusion) / rep.n_vertebrae)

    def test_absent_regions_have_zero_rows(self):
        # thoracic-only corpus: cervical and lumbar rows stay empty
        cases = [make_case([one_hot(t) for t in range(8, 12)], truths=list(range(8, 12)))]
        rep = evaluate(cases, [[8, 9, 10, 11]])
        assert rep.per_class_confusion[:7].sum() == 0
        assert rep.per_class_confusion[19:].sum() == 0

    def test_constrained_per_case_all_or_nothing(self):
        rng = np.random.default_rng(6)
        cases, preds = [], []
        for i in range(20):
            k = int(rng.integers(2, 7))
            start = int(rng.integers(0, 24 - k + 1))
            rows = []
            for t in range(start, start + k):
                base = np.full(24, 0.01)
                base[t] = 0.5
                rows.append(base / base.sum())
            cases.append(make_case(rows, truths=list(range(start, start + k)), case_id=f"c{i}"))
            preds.append([ConfidenceState(r) for r in rows])
        rep = evaluate(cases, preds, decode="constrained")
        assert set(rep.per_case_id_rate) <= {0.0, 1.0}

    def test_missing_truth_rejected(self):
        rng = np.random.default_rng(7)
        case = make_case([random_probs(rng)[0]])
        with pytest.raises(ValidationError, match="ground truth"):
            evaluate([case], [[3]])

    def test_alignment_mismatch_rejected(self):
        cases = [make_case([one_hot(5)], truths=[5])]
        with pytest.raises(ValidationError, match="predictions"):
            evaluate(cases, [[5, 6]])
        with pytest.raises(ValidationError, match="prediction lists"):
            evaluate(cases, [])
