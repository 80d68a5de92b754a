import logging

import numpy as np
import pytest

from plc_lab.audio_io import Waveform, write_wav
from plc_lab.errors import PlcError
from plc_lab.mushra import (
    ANCHOR,
    REFERENCE,
    MushraSession,
    Rating,
    RatingRecord,
    RatingStore,
    StimulusSet,
    build_session,
    compute_ranking,
    confidence_interval,
    read_ratings_csv,
    resolve_ratings,
    trial_winner,
    write_ranking_csv,
    write_ratings_csv,
    write_trial_means_csv,
)

SYSTEMS = ["alpha", "bravo", "charlie", "delta"]
CLIPS = [f"clip{i:02d}" for i in range(10)]


@pytest.fixture(scope="module")
def stimuli(tmp_path_factory):
    root = tmp_path_factory.mktemp("stimuli")
    w = Waveform(np.zeros(512), 44100)
    dirs = {"refs": root / "refs", "anchors": root / "anchors"}
    system_dirs = {}
    for name in SYSTEMS:
        system_dirs[name] = root / "sys" / name
    for d in list(dirs.values()) + list(system_dirs.values()):
        d.mkdir(parents=True)
    for clip in CLIPS:
        for d in list(dirs.values()) + list(system_dirs.values()):
            write_wav(w, d / f"{clip}.wav")
    return StimulusSet(dirs["refs"], dirs["anchors"], system_dirs)


class TestBuildSession:
    def test_structure(self, stimuli):
        s = build_session(stimuli, CLIPS, SYSTEMS, "ann", assessor_seed=1)
        assert len(s.trials) == 10
        assert len(s.training_items) == 4
        for trial in s.trials:
            names = [c.name for c in trial.conditions]
            assert len(trial.conditions) == 6
            assert sorted(names) == sorted([REFERENCE, ANCHOR] + SYSTEMS)

    def test_same_seed_identical(self, stimuli):
        a = build_session(stimuli, CLIPS, SYSTEMS, "ann", 42)
        b = build_session(stimuli, CLIPS, SYSTEMS, "ann", 42)
        assert a == b

    def test_different_seeds_differ_but_same_stimuli(self, stimuli):
        a = build_session(stimuli, CLIPS, SYSTEMS, "ann", 1)
        b = build_session(stimuli, CLIPS, SYSTEMS, "bob", 2)
        assert [t.clip_id for t in a.trials] != [t.clip_id for t in b.trials]
        assert sorted(t.clip_id for t in a.trials) == sorted(t.clip_id for t in b.trials)
        a_tokens = {c.token for t in a.trials for c in t.conditions}
        b_tokens = {c.token for t in b.trials for c in t.conditions}
        assert not (a_tokens & b_tokens)

    def test_wrong_cardinalities_rejected(self, stimuli):
        with pytest.raises(PlcError, match="10 trial clips"):
            build_session(stimuli, CLIPS[:9], SYSTEMS, "ann", 1)
        with pytest.raises(PlcError, match="4 systems"):
            build_session(stimuli, CLIPS, SYSTEMS[:3], "ann", 1)

    def test_missing_stimulus_rejected(self, stimuli):
        with pytest.raises(PlcError, match="missing stimulus"):
            build_session(stimuli, CLIPS[:9] + ["nope"], SYSTEMS, "ann", 1)

    def test_tokens_are_opaque(self, stimuli):
        s = build_session(stimuli, CLIPS, SYSTEMS, "ann", 3)
        view = s.client_view()
        text = str(view)
        for name in SYSTEMS + [REFERENCE, ANCHOR]:
            assert name not in str(view["trials"])
        for token in [c for t in view["trials"] for c in t["conditions"]]:
            assert len(token) == 32
            int(token, 16)  # hex
        assert "conditions" in view["trials"][0] and "reference" in view["trials"][0]
        assert text.count("token") >= 4

    def test_labelled_reference_token_differs_from_hidden(self, stimuli):
        s = build_session(stimuli, CLIPS, SYSTEMS, "ann", 4)
        for trial in s.trials:
            hidden = {c.token for c in trial.conditions}
            assert trial.reference_token not in hidden


class TestRatingStore:
    def test_bounds(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        store.record(Rating("a", "t", "c", 100))
        with pytest.raises(PlcError, match="outside"):
            Rating("a", "t", "c", 101)
        with pytest.raises(PlcError, match="outside"):
            Rating("a", "t", "c", -1)
        with pytest.raises(PlcError, match="integer"):
            Rating("a", "t", "c", 55.5)

    def test_last_write_wins(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        store.record(Rating("a", "t", "c", 10))
        store.record(Rating("a", "t", "c", 90))
        ratings = store.all_ratings()
        assert len(ratings) == 1 and ratings[0].score == 90
        # but the log keeps both appends
        assert len((tmp_path / "r.jsonl").read_text().splitlines()) == 2

    def test_reload_from_disk(self, tmp_path):
        path = tmp_path / "r.jsonl"
        RatingStore(path).record(Rating("a", "t", "c", 42))
        again = RatingStore(path)
        assert again.all_ratings()[0].score == 42

    def test_token_validation_against_session(self, stimuli, tmp_path):
        session = build_session(stimuli, CLIPS, SYSTEMS, "ann", 5)
        store = RatingStore(tmp_path / "r.jsonl")
        trial = session.trials[0]
        good = Rating("ann", trial.trial_id, trial.conditions[0].token, 80)
        store.record(good, session)
        bad = Rating("ann", trial.trial_id, "deadbeef", 80)
        with pytest.raises(PlcError, match="unknown condition token"):
            store.record(bad, session)

    def test_hidden_reference_rateable(self, stimuli, tmp_path):
        session = build_session(stimuli, CLIPS, SYSTEMS, "ann", 6)
        trial = session.trials[0]
        ref_cond = next(c for c in trial.conditions if c.name == REFERENCE)
        store = RatingStore(tmp_path / "r.jsonl")
        store.record(Rating("ann", trial.trial_id, ref_cond.token, 100), session)
        assert len(store) == 1


class TestTrialWinner:
    def test_highest_mean_wins(self):
        scores = {"alpha": [70], "bravo": [80], ANCHOR: [20], REFERENCE: [98],
                  "charlie": [10], "delta": [5]}
        assert trial_winner(scores) == "bravo"

    def test_anchor_and_reference_ineligible(self):
        scores = {"alpha": [50], "bravo": [40], "charlie": [30], "delta": [20],
                  ANCHOR: [99], REFERENCE: [100]}
        assert trial_winner(scores) == "alpha"

    def test_exact_tie_lexicographic_with_warning(self, caplog):
        scores = {"alpha": [60], "bravo": [60], "charlie": [60], "delta": [60]}
        with caplog.at_level(logging.WARNING, logger="plc_lab.mushra"):
            assert trial_winner(scores) == "alpha"
        assert any("tie" in rec.message for rec in caplog.records)

    def test_empty_trial_rejected(self):
        with pytest.raises(PlcError, match="no system ratings"):
            trial_winner({REFERENCE: [100]})


class TestConfidenceInterval:
    def test_equal_scores_zero(self):
        assert confidence_interval([75, 75, 75, 75]) == 0.0

    def test_t_table_example(self):
        assert confidence_interval([80, 90, 100]) == pytest.approx(24.84, abs=0.01)

    def test_shrinks_with_n(self):
        narrow = confidence_interval([80, 90, 100, 80, 90, 100])
        assert narrow < confidence_interval([80, 90, 100])

    def test_needs_two(self):
        with pytest.raises(PlcError):
            confidence_interval([50])


def synthetic_records(top="alpha", runner_up="bravo", assessors=3):
    """alpha tops 9 trials, runner-up tops the remaining one."""
    records = []
    for a in range(assessors):
        name = f"assessor{a}"
        for t, clip in enumerate(CLIPS):
            leader = runner_up if t == 0 else top
            base = {REFERENCE: 99, ANCHOR: 15, "alpha": 55, "bravo": 50,
                    "charlie": 40, "delta": 30}
            base[leader] = 90
            for cond, score in base.items():
                records.append(RatingRecord(name, clip, cond, score + a))
    return records


class TestRanking:
    def test_nine_one_split(self):
        result = compute_ranking(synthetic_records(), SYSTEMS)
        assert result.wins == {"alpha": 9, "bravo": 1, "charlie": 0, "delta": 0}
        assert result.ranking[:2] == ("alpha", "bravo")
        assert sum(result.wins.values()) == 10

    def test_win_tie_broken_by_mean(self):
        records = []
        for t, clip in enumerate(CLIPS):
            leader = "alpha" if t < 5 else "bravo"
            scores = {"alpha": 40, "bravo": 60, "charlie": 20, "delta": 10, leader: 90}
            for cond, score in scores.items():
                records.append(RatingRecord("x", clip, cond, score))
        result = compute_ranking(records, SYSTEMS)
        assert result.wins["alpha"] == result.wins["bravo"] == 5
        assert result.ranking[0] == "bravo"  # higher overall mean

    def test_assessor_permutation_invariant(self):
        records = synthetic_records()
        result_fwd = compute_ranking(records, SYSTEMS)
        result_rev = compute_ranking(list(reversed(records)), SYSTEMS)
        assert result_fwd.ranking == result_rev.ranking
        assert result_fwd.wins == result_rev.wins

    def test_constant_shift_leaves_ranking(self):
        records = synthetic_records()
        shifted = [RatingRecord(r.assessor_id, r.trial_id, r.condition, r.score + 7)
                   for r in records]
        a = compute_ranking(records, SYSTEMS)
        b = compute_ranking(shifted, SYSTEMS)
        assert a.ranking == b.ranking and a.wins == b.wins
        for name in SYSTEMS:
            assert b.overall_means[name] == pytest.approx(a.overall_means[name] + 7)

    def test_incomplete_trial_listed(self):
        records = [r for r in synthetic_records() if not
                   (r.trial_id == CLIPS[3] and r.condition == "charlie")]
        with pytest.raises(PlcError, match=CLIPS[3]):
            compute_ranking(records, SYSTEMS)

    def test_per_trial_means_shape(self):
        result = compute_ranking(synthetic_records(), SYSTEMS)
        assert len(result.per_trial_means) == 10
        for means in result.per_trial_means.values():
            assert set(SYSTEMS) <= set(means)


class TestScreening:
    def test_off_by_default_pipeline_unscreened(self):
        from plc_lab.mushra import screen_assessors

        records = synthetic_records()
        kept, excluded = screen_assessors(records)
        assert excluded == [] and kept == records

    def test_sloppy_assessor_excluded(self):
        from plc_lab.mushra import screen_assessors

        records = synthetic_records()
        sloppy = [
            RatingRecord("sloppy", clip, cond, 40 if cond == REFERENCE else 50)
            for clip in CLIPS
            for cond in [REFERENCE, ANCHOR] + SYSTEMS
        ]
        kept, excluded = screen_assessors(records + sloppy)
        assert excluded == ["sloppy"]
        assert all(r.assessor_id != "sloppy" for r in kept)

    def test_occasional_miss_tolerated(self):
        from plc_lab.mushra import screen_assessors

        # one low reference score in ten trials is within the 15% allowance
        records = []
        for t, clip in enumerate(CLIPS):
            ref = 80 if t == 0 else 100
            for cond, score in {REFERENCE: ref, ANCHOR: 10, "alpha": 50,
                                "bravo": 40, "charlie": 30, "delta": 20}.items():
                records.append(RatingRecord("ok", clip, cond, score))
        kept, excluded = screen_assessors(records)
        assert excluded == []


class TestResolveAndCsv:
    def test_resolve_through_session(self, stimuli, tmp_path):
        sessions = {}
        ratings = []
        for assessor, seed in (("ann", 11), ("bob", 22)):
            session = build_session(stimuli, CLIPS, SYSTEMS, assessor, seed)
            sessions[assessor] = session
            for trial in session.trials:
                for cond in trial.conditions:
                    ratings.append(Rating(assessor, trial.trial_id, cond.token, 64))
        records = resolve_ratings(ratings, sessions)
        result = compute_ranking(records, SYSTEMS)
        assert sum(result.wins.values()) == 10

        out = tmp_path / "ratings.csv"
        write_ratings_csv(records, out)
        back = read_ratings_csv(out)
        assert back == records
        write_ranking_csv(result, tmp_path / "ranking.csv")
        write_trial_means_csv(result, tmp_path / "trials.csv")
        assert (tmp_path / "ranking.csv").read_text().startswith("rank,system,wins,mean,ci95")
        assert len((tmp_path / "trials.csv").read_text().splitlines()) == 11

    def test_unknown_token_rejected(self, stimuli):
        session = build_session(stimuli, CLIPS, SYSTEMS, "ann", 11)
        with pytest.raises(PlcError, match="not in assessor"):
            resolve_ratings([Rating("ann", CLIPS[0], "feedface", 10)], {"ann": session})
