import functools

import numpy as np
import pytest

from unitailkit.errors import ParameterError
from unitailkit.text_eval import (
    TextRegion,
    Vocabulary,
    edit_distance,
    ned,
    normalize_transcription,
    text_det_prf,
    vocab_correct,
    word_accuracy,
)

from geomutil import rect, square


def lev_oracle(a: str, b: str) -> int:
    """Naive recursive Levenshtein with memoization (test oracle)."""

    @functools.lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            go(i - 1, j) + 1,
            go(i, j - 1) + 1,
            go(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return go(len(a), len(b))


def random_word(rng, max_len=12) -> str:
    n = int(rng.integers(0, max_len + 1))
    return "".join(rng.choice(list("abcde01")) for _ in range(n))


class TestNormalize:
    def test_numeric_units_kept_whole(self):
        assert normalize_transcription("120mg") == "120mg"

    def test_case_fold_and_symbol_strip(self):
        assert normalize_transcription("CREAM!") == "cream"

    def test_empty(self):
        assert normalize_transcription("") == ""

    def test_strips_everything_non_alphanumeric(self):
        assert normalize_transcription("Na-K 2.5%") == "nak25"


def legible(quad, text) -> TextRegion:
    return TextRegion(quad, True, text)


def illegible(quad) -> TextRegion:
    return TextRegion(quad, False)


class TestTextDetPrf:
    def test_perfect(self):
        gts = [legible(square(0, 0, 10), "a"), legible(square(20, 0, 10), "b")]
        preds = [g.quad for g in gts]
        assert text_det_prf(preds, gts) == pytest.approx((1.0, 1.0, 1.0))

    def test_no_predictions(self):
        gts = [legible(square(0, 0, 10), "a")]
        assert text_det_prf([], gts) == pytest.approx((0.0, 0.0, 0.0))

    def test_two_matches_one_stray(self):
        gts = [legible(square(0, 0, 10), "a"), legible(square(20, 0, 10), "b")]
        preds = [square(0, 0, 10), square(20, 0, 10), square(50, 50, 10)]
        p, r, h = text_det_prf(preds, gts)
        assert (p, r) == pytest.approx((2.0 / 3.0, 1.0))
        assert h == pytest.approx(0.8)

    def test_prediction_on_illegible_is_dont_care(self):
        gts = [legible(square(0, 0, 10), "a"), illegible(square(30, 30, 10))]
        preds = [square(0, 0, 10), square(30, 30, 10)]
        p, r, h = text_det_prf(preds, gts)
        assert (p, r, h) == pytest.approx((1.0, 1.0, 1.0))

    def test_untouched_illegible_removal_is_noop(self):
        gts = [legible(square(0, 0, 10), "a"), illegible(square(90, 90, 5))]
        preds = [square(0, 1, 10), square(50, 0, 8)]
        with_dc = text_det_prf(preds, gts)
        without_dc = text_det_prf(preds, gts[:1])
        assert with_dc == pytest.approx(without_dc)

    def test_prediction_order_invariance(self):
        rng = np.random.default_rng(131)
        gts = [
            legible(square(0, 0, 10), "a"),
            legible(square(15, 0, 10), "b"),
            illegible(square(40, 40, 10)),
        ]
        preds = [
            square(1, 0, 10),
            square(14, 0, 10),
            square(41, 40, 10),
            square(70, 70, 10),
        ]
        base = text_det_prf(preds, gts)
        for _ in range(10):
            perm = list(rng.permutation(len(preds)))
            assert text_det_prf([preds[i] for i in perm], gts) == pytest.approx(base)

    def test_one_to_one_matching(self):
        # two predictions over one gt: only one can match
        gts = [legible(square(0, 0, 10), "a")]
        preds = [square(0, 0, 10), square(0, 1, 10)]
        p, r, h = text_det_prf(preds, gts)
        assert (p, r) == pytest.approx((0.5, 1.0))


class TestTextRegionValidation:
    def test_legible_needs_transcription(self):
        with pytest.raises(ParameterError):
            TextRegion(square(0, 0, 5), True, "")

    def test_legible_must_be_normalized(self):
        with pytest.raises(ParameterError):
            TextRegion(square(0, 0, 5), True, "Cream")

    def test_illegible_must_be_empty(self):
        with pytest.raises(ParameterError):
            TextRegion(square(0, 0, 5), False, "x")


class TestEditDistance:
    def test_identity(self):
        assert edit_distance("abc", "abc") == 0

    def test_single_substitution(self):
        assert edit_distance("abc", "abd") == 1

    def test_kitten_sitting(self):
        assert edit_distance("kitten", "sitting") == 3
        assert lev_oracle("kitten", "sitting") == 3

    def test_against_recursive_oracle(self):
        rng = np.random.default_rng(137)
        for _ in range(300):
            a, b = random_word(rng), random_word(rng)
            assert edit_distance(a, b) == lev_oracle(a, b)

    def test_metric_axioms(self):
        rng = np.random.default_rng(139)
        for _ in range(300):
            a, b, c = (random_word(rng, 8) for _ in range(3))
            dab = edit_distance(a, b)
            assert dab == edit_distance(b, a)
            assert (dab == 0) == (a == b)
            assert dab <= edit_distance(a, c) + edit_distance(c, b)


class TestNed:
    def test_exact_matches(self):
        assert ned([("abc", "abc"), ("x", "x")]) == 0.0

    def test_full_deletion(self):
        assert ned([("ab", "")]) == 1.0

    def test_mixed_pairs(self):
        assert ned([("abc", "abd"), ("ab", "ab")]) == pytest.approx(1.0 / 6.0)

    def test_gt_denominator_switch(self):
        # pred longer than gt: gt-normalization can exceed max-normalization
        assert ned([("abcd", "ab")], denominator="max") == pytest.approx(0.5)
        assert ned([("abcd", "ab")], denominator="gt") == pytest.approx(1.0)

    def test_bounded_in_unit_interval(self):
        rng = np.random.default_rng(149)
        pairs = [(random_word(rng), random_word(rng)) for _ in range(200)]
        assert 0.0 <= ned(pairs) <= 1.0

    def test_empty_input(self):
        assert ned([]) == 0.0

    def test_bad_denominator(self):
        with pytest.raises(ParameterError):
            ned([("a", "a")], denominator="pred")


class TestWordAccuracy:
    def test_identical(self):
        assert word_accuracy([("a", "a"), ("bb", "bb")]) == 1.0

    def test_disjoint(self):
        assert word_accuracy([("a", "b"), ("c", "d")]) == 0.0

    def test_three_of_four(self):
        pairs = [("a", "a"), ("b", "b"), ("c", "c"), ("d", "x")]
        assert word_accuracy(pairs) == 0.75

    def test_perfect_accuracy_implies_zero_ned(self):
        rng = np.random.default_rng(151)
        pairs = [(w := random_word(rng), w) for _ in range(50)]
        assert word_accuracy(pairs) == 1.0
        assert ned(pairs) == 0.0


class TestVocabCorrect:
    def test_in_vocab_identity(self):
        vocab = Vocabulary(frozenset({"cream", "crew"}))
        assert vocab_correct("cream", vocab) == "cream"

    def test_nearest_word_wins(self):
        # distances: cream needs 2 substitutions, crew needs 1 deletion
        vocab = Vocabulary(frozenset({"cream", "crew"}))
        assert lev_oracle("cre4w", "cream") == 2
        assert lev_oracle("cre4w", "crew") == 1
        assert vocab_correct("cre4w", vocab) == "crew"

    def test_empty_prediction(self):
        vocab = Vocabulary(frozenset({"a", "bb"}))
        assert lev_oracle("", "a") == 1 and lev_oracle("", "bb") == 2
        assert vocab_correct("", vocab) == "a"

    def test_tie_breaks_lexicographically(self):
        vocab = Vocabulary(frozenset({"ac", "aa"}))
        assert lev_oracle("ab", "aa") == 1 and lev_oracle("ab", "ac") == 1
        assert vocab_correct("ab", vocab) == "aa"

    def test_empty_vocab_rejected(self):
        with pytest.raises(ParameterError):
            Vocabulary(frozenset())
