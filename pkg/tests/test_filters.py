import math

import numpy as np
import pytest

from wildcut.filters import FilterParams, apply_filters, char_dur_outlier_flags, quantile
from wildcut.model import SegmentRecord, count_chars


def hand_type7(values, p):
    # independent statement of the interpolation rule
    h = (len(values) - 1) * p
    lo = math.floor(h)
    hi = math.ceil(h)
    return values[lo] + (h - lo) * (values[hi] - values[lo])


# --- quantile ----------------------------------------------------------------


def test_quantile_median_odd():
    assert quantile([1, 2, 3, 4, 5], 0.5) == 3.0


def test_quantile_endpoints():
    vals = [3.0, 7.0, 9.0, 11.0]
    assert quantile(vals, 0.0) == 3.0
    assert quantile(vals, 1.0) == 11.0


def test_quantile_interpolates():
    # h = 3 * 0.25 = 0.75 -> 1 + 0.75 * (2 - 1) = 1.75
    assert quantile([1, 2, 3, 4], 0.25) == 1.75


def test_quantile_exact_vs_oracle(rng):
    for _ in range(500):
        n = int(rng.integers(1, 60))
        vals = sorted(rng.uniform(-100, 100, size=n).tolist())
        p = float(rng.uniform(0, 1))
        assert quantile(vals, p) == hand_type7(vals, p)
        assert quantile(vals, p) == pytest.approx(float(np.quantile(vals, p)), abs=1e-9)


def test_quantile_rejects_empty():
    with pytest.raises(ValueError):
        quantile([], 0.5)


# --- IQR flags ---------------------------------------------------------------


def test_flags_all_equal_values():
    assert char_dur_outlier_flags([0.2] * 6) == [False] * 6


def test_flags_single_outlier():
    # Q1 = 0.11, Q3 = 0.13, fences [0.08, 0.16]
    flags = char_dur_outlier_flags([0.10, 0.11, 0.12, 0.13, 0.50])
    assert flags == [False, False, False, False, True]


def test_flags_small_source_skipped():
    assert char_dur_outlier_flags([0.1, 0.1, 9.9]) == [False, False, False]


def test_flags_reject_nonpositive():
    with pytest.raises(ValueError):
        char_dur_outlier_flags([0.1, -0.1, 0.2, 0.3])


# --- apply_filters -----------------------------------------------------------


def rec(i, *, language="en", conf=0.95, mos=3.5, dur=5.0, text="some plain words here",
        source="src1"):
    return SegmentRecord.build(
        segment_id=f"{source}_{i:05d}",
        wav_path=f"wav/{source}/{source}_{i:05d}.wav",
        text=text,
        language=language,
        lang_confidence=conf,
        speaker_label="spk0",
        duration_s=dur,
        dnsmos_ovrl=mos,
        source_id=source,
    )


def reasons(drops):
    return {d.id: d.reason for d in drops}


def test_non_target_language_dropped():
    kept, drops = apply_filters([rec(0, language="it", conf=0.95)])
    assert kept == []
    assert reasons(drops)[rec(0).segment_id] == "not_target_language"


def test_low_confidence_dropped():
    kept, drops = apply_filters([rec(0, conf=0.5)])
    assert reasons(drops)[rec(0).segment_id] == "low_lang_confidence"


def test_quality_boundary_is_strict():
    # exactly 3.0 fails: the rule is "higher than", not "at least"
    kept, drops = apply_filters([rec(0, mos=3.0)])
    assert kept == []
    assert reasons(drops)[rec(0).segment_id] == "low_quality_score"


def test_duration_floor():
    kept, drops = apply_filters([rec(0, dur=2.9)])
    assert reasons(drops)[rec(0).segment_id] == "too_short"


def test_duration_floor_inclusive():
    kept, _ = apply_filters([rec(0, dur=3.0)])
    assert len(kept) == 1


def test_empty_transcript_dropped():
    kept, drops = apply_filters([rec(0, text="  ")])
    assert reasons(drops)[rec(0).segment_id] == "empty_transcript"


def test_first_failing_reason_wins():
    _, drops = apply_filters([rec(0, language="it", mos=1.0, dur=0.5)])
    assert drops[0].reason == "not_target_language"


def test_iqr_outlier_dropped_within_source():
    # durations tuned so one avg char duration is far outside the fence
    text = "x" * 20
    records = [rec(i, text=text, dur=d) for i, d in enumerate([4.0, 4.2, 4.4, 4.6, 29.0])]
    kept, drops = apply_filters(records)
    assert [r.segment_id for r in kept] == [r.segment_id for r in records[:4]]
    assert reasons(drops)[records[4].segment_id] == "char_dur_outlier"


def test_iqr_skipped_for_tiny_sources():
    text = "x" * 20
    records = [rec(i, text=text, dur=d) for i, d in enumerate([4.0, 4.2, 29.0])]
    kept, _ = apply_filters(records)
    assert len(kept) == 3


def test_source_scope_language_filter_discards_whole_source():
    records = [rec(0), rec(1, language="it"), rec(2)]
    kept, drops = apply_filters(records, FilterParams(language_scope="source"))
    assert kept == []
    assert [d.reason for d in drops] == ["not_target_language"] * 3


def test_segment_scope_keeps_other_segments():
    records = [rec(0), rec(1, language="it"), rec(2), rec(3), rec(4)]
    kept, drops = apply_filters(records)
    assert len(kept) == 4
    assert len(drops) == 1


def test_language_scope_validated():
    with pytest.raises(ValueError, match="language_scope"):
        apply_filters([rec(0)], FilterParams(language_scope="corpus"))


def test_partition_and_order_preserved(rng):
    records = random_corpus(rng, n=40)
    kept, drops = apply_filters(records)
    kept_ids = [r.segment_id for r in kept]
    drop_ids = [d.id for d in drops]
    assert set(kept_ids) | set(drop_ids) == {r.segment_id for r in records}
    assert set(kept_ids).isdisjoint(drop_ids)
    ordered = [r.segment_id for r in records]
    assert kept_ids == [i for i in ordered if i in set(kept_ids)]
    assert drop_ids == [i for i in ordered if i in set(drop_ids)]


# --- oracle equivalence and properties ----------------------------------------


LANGS = ["en", "zh", "de", "fr", "ja", "ko", "it", "es", "ru"]


def random_corpus(rng, n=None, source="s"):
    n = n or int(rng.integers(1, 40))
    records = []
    for i in range(n):
        n_chars = int(rng.integers(0, 60))
        text = "ab c"[: max(0, n_chars)] if n_chars < 4 else "x" * n_chars
        records.append(
            rec(
                i,
                language=LANGS[rng.integers(0, len(LANGS))],
                conf=float(rng.uniform(0, 1)),
                mos=float(rng.uniform(1, 5)),
                dur=float(rng.uniform(0.5, 30.0)),
                text=text,
                source=source,
            )
        )
    return records


def oracle_kept_ids(records, params: FilterParams):
    """Brute-force restatement of the four criteria with numpy quartiles."""
    survivors = [
        r
        for r in records
        if r.language in params.target_languages
        and r.lang_confidence >= params.min_lang_confidence
        and r.dnsmos_ovrl > params.min_quality
        and r.duration_s >= params.min_duration_s
        and count_chars(r.text) > 0
    ]
    if len(survivors) >= params.min_segments_for_iqr:
        vals = np.array([r.avg_char_dur_s for r in survivors])
        q1, q3 = np.quantile(vals, [0.25, 0.75])
        iqr = q3 - q1
        lo, hi = q1 - params.iqr_multiplier * iqr, q3 + params.iqr_multiplier * iqr
        survivors = [r for r, v in zip(survivors, vals) if lo <= v <= hi]
    return {r.segment_id for r in survivors}


def test_matches_brute_force_oracle(rng):
    params = FilterParams()
    for _ in range(100):
        records = random_corpus(rng)
        kept, _ = apply_filters(records, params)
        assert {r.segment_id for r in kept} == oracle_kept_ids(records, params)


def test_quality_threshold_monotonicity(rng):
    records = random_corpus(rng, n=120)
    previous = None
    for threshold in [1.0, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0]:
        params = FilterParams(min_quality=threshold)
        kept, _ = apply_filters(records, params)
        ids = {r.segment_id for r in kept}
        if previous is not None:
            assert ids <= previous
        previous = ids


def test_criteria_one_to_three_idempotent(rng):
    # with the IQR fence quiet, a second pass must keep everything
    params = FilterParams(iqr_multiplier=1e9)
    for _ in range(20):
        records = random_corpus(rng)
        kept, _ = apply_filters(records, params)
        kept2, _ = apply_filters(kept, params)
        assert kept2 == kept


def test_full_filter_mostly_idempotent(rng):
    stable = 0
    trials = 100
    for _ in range(trials):
        records = random_corpus(rng)
        kept, _ = apply_filters(records)
        kept2, _ = apply_filters(kept)
        if kept2 == kept:
            stable += 1
    assert stable >= 0.95 * trials
