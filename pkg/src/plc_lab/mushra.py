"""MUSHRA listening sessions, rating storage, and the challenge ranking.

Each session holds ten trials of six conditions (hidden reference, zero-fill
anchor, four systems) behind opaque tokens; trial order, within-trial order,
and tokens all derive deterministically from the assessor seed. The ranking
counts trials won (highest mean score among the systems), with the overall
mean score as tie-breaker.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .errors import PlcError

log = logging.getLogger(__name__)

REFERENCE = "__reference__"
ANCHOR = "__anchor__"

TRIALS_PER_SESSION = 10
SYSTEMS_PER_SESSION = 4
CONDITIONS_PER_TRIAL = 6  # hidden reference + anchor + 4 systems
TRAINING_PAIRS = 2

SCORE_MIN = 0
SCORE_MAX = 100


@dataclass(frozen=True)
class StimulusSet:
    """Resolves (clip, condition) to a WAV path.

    Layout: reference_dir/<clip>.wav, anchor_dir/<clip>.wav,
    system_dirs[name]/<clip>.wav.
    """

    reference_dir: Path
    anchor_dir: Path
    system_dirs: Mapping[str, Path]

    def path(self, clip_id: str, condition: str) -> Path:
        if condition == REFERENCE:
            base = self.reference_dir
        elif condition == ANCHOR:
            base = self.anchor_dir
        elif condition in self.system_dirs:
            base = self.system_dirs[condition]
        else:
            raise PlcError(f"unknown condition {condition!r}")
        return Path(base) / f"{clip_id}.wav"

    def missing(self, clip_ids: Sequence[str], systems: Sequence[str]) -> list[str]:
        gone = []
        for clip in clip_ids:
            for cond in [REFERENCE, ANCHOR, *systems]:
                p = self.path(clip, cond)
                if not p.exists():
                    gone.append(str(p))
        return gone


@dataclass(frozen=True)
class Condition:
    token: str
    clip_id: str
    name: str  # REFERENCE, ANCHOR, or a system name


@dataclass(frozen=True)
class Trial:
    trial_id: str
    clip_id: str
    reference_token: str  # the openly-labelled reference player
    conditions: tuple[Condition, ...]


@dataclass(frozen=True)
class TrainingItem:
    label: str
    token: str
    clip_id: str
    condition: str


@dataclass(frozen=True)
class MushraSession:
    assessor_id: str
    assessor_seed: int
    trials: tuple[Trial, ...]
    training_items: tuple[TrainingItem, ...]

    def conditions_by_token(self) -> dict[str, Condition]:
        return {c.token: c for t in self.trials for c in t.conditions}

    def audio_tokens(self) -> dict[str, tuple[str, str]]:
        """Every playable token -> (clip_id, condition), including labelled
        references and training items."""
        out = {c.token: (c.clip_id, c.name) for t in self.trials for c in t.conditions}
        out.update({t.reference_token: (t.clip_id, REFERENCE) for t in self.trials})
        out.update({i.token: (i.clip_id, i.condition) for i in self.training_items})
        return out

    def client_view(self) -> dict:
        """JSON-safe view with all condition identities stripped."""
        return {
            "assessor_id": self.assessor_id,
            "training": [{"label": i.label, "token": i.token} for i in self.training_items],
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "reference": t.reference_token,
                    "conditions": [c.token for c in t.conditions],
                }
                for t in self.trials
            ],
        }


@dataclass(frozen=True)
class Rating:
    assessor_id: str
    trial_id: str
    condition_id: str
    score: int

    def __post_init__(self):
        if not isinstance(self.score, int) or isinstance(self.score, bool):
            raise PlcError(f"score must be an integer, got {self.score!r}")
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise PlcError(f"score {self.score} outside [{SCORE_MIN}, {SCORE_MAX}]")


@dataclass(frozen=True)
class RatingRecord:
    """A rating with its condition resolved to a name (system, reference, anchor)."""

    assessor_id: str
    trial_id: str
    condition: str
    score: int


@dataclass(frozen=True)
class RankingResult:
    systems: tuple[str, ...]
    wins: dict[str, int]
    overall_means: dict[str, float]
    per_trial_means: dict[str, dict[str, float]]
    ci95: dict[str, float]
    ranking: tuple[str, ...]

    def as_rows(self) -> list[dict]:
        return [
            {
                "rank": i + 1,
                "system": name,
                "wins": self.wins[name],
                "mean": self.overall_means[name],
                "ci95": self.ci95[name],
            }
            for i, name in enumerate(self.ranking)
        ]


def _token(rng: np.random.Generator) -> str:
    return bytes(rng.integers(0, 256, size=16, dtype=np.uint8)).hex()


def build_session(
    stimuli: StimulusSet,
    trial_clips: Sequence[str],
    systems: Sequence[str],
    assessor_id: str,
    assessor_seed: int,
) -> MushraSession:
    """Assemble a session: training pairs from the first two clips, then ten
    trials in seed-derived order with shuffled, tokenized conditions."""
    if len(trial_clips) != TRIALS_PER_SESSION:
        raise PlcError(f"need exactly {TRIALS_PER_SESSION} trial clips, got {len(trial_clips)}")
    if len(set(trial_clips)) != len(trial_clips):
        raise PlcError("trial clips must be distinct")
    if len(systems) != SYSTEMS_PER_SESSION:
        raise PlcError(f"need exactly {SYSTEMS_PER_SESSION} systems, got {len(systems)}")
    missing = stimuli.missing(trial_clips, systems)
    if missing:
        raise PlcError("missing stimulus files: " + ", ".join(missing))

    rng = np.random.default_rng(assessor_seed)
    training = []
    for pair, clip in enumerate(trial_clips[:TRAINING_PAIRS]):
        training.append(TrainingItem(f"Example {pair + 1} - clean", _token(rng), clip, REFERENCE))
        training.append(TrainingItem(f"Example {pair + 1} - degraded", _token(rng), clip, ANCHOR))

    trials = []
    for clip_index in rng.permutation(len(trial_clips)):
        clip = trial_clips[int(clip_index)]
        names = [REFERENCE, ANCHOR, *systems]
        order = rng.permutation(len(names))
        conditions = tuple(Condition(_token(rng), clip, names[int(i)]) for i in order)
        trials.append(Trial(trial_id=clip, clip_id=clip, reference_token=_token(rng), conditions=conditions))

    return MushraSession(assessor_id, assessor_seed, tuple(trials), tuple(training))


class RatingStore:
    """Append-only JSON-lines persistence with an in-memory last-write-wins index."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[tuple[str, str, str], int] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    r = json.loads(line)
                    self._index[(r["assessor_id"], r["trial_id"], r["condition_id"])] = int(r["score"])

    def record(self, rating: Rating, session: MushraSession | None = None) -> None:
        self.record_batch([rating], session)

    def record_batch(self, ratings: Sequence[Rating], session: MushraSession | None = None) -> None:
        """Validate then append all ratings as one atomic write."""
        if session is not None:
            valid = {
                (t.trial_id, c.token) for t in session.trials for c in t.conditions
            }
            for r in ratings:
                if (r.trial_id, r.condition_id) not in valid:
                    raise PlcError(
                        f"unknown condition token {r.condition_id!r} for trial {r.trial_id!r}"
                    )
        lines = "".join(
            json.dumps({
                "assessor_id": r.assessor_id,
                "trial_id": r.trial_id,
                "condition_id": r.condition_id,
                "score": r.score,
            }) + "\n"
            for r in ratings
        )
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(lines)
            for r in ratings:
                self._index[(r.assessor_id, r.trial_id, r.condition_id)] = r.score

    def all_ratings(self) -> list[Rating]:
        with self._lock:
            return [
                Rating(a, t, c, score)
                for (a, t, c), score in sorted(self._index.items())
            ]

    def __len__(self) -> int:
        return len(self._index)


def trial_winner(scores_by_condition: Mapping[str, Sequence[int]]) -> str:
    """Highest mean score among the systems; reference and anchor never win.

    Exact mean ties go to the lexicographically first system, with a warning.
    """
    means = {
        name: float(np.mean(scores))
        for name, scores in scores_by_condition.items()
        if name not in (REFERENCE, ANCHOR) and len(scores)
    }
    if not means:
        raise PlcError("trial has no system ratings")
    best = max(means.values())
    winners = sorted(name for name, m in means.items() if m == best)
    if len(winners) > 1:
        log.warning("exact tie between %s at mean %.2f; picking %r", winners, best, winners[0])
    return winners[0]


def confidence_interval(scores: Sequence[float]) -> float:
    """Two-sided 95% t-interval half-width, t_{0.975,n-1} * s / sqrt(n)."""
    n = len(scores)
    if n < 2:
        raise PlcError("confidence interval needs at least 2 scores")
    s = float(np.std(scores, ddof=1))
    t = float(scipy_stats.t.ppf(0.975, n - 1))
    return t * s / np.sqrt(n)


def compute_ranking(records: Iterable[RatingRecord], systems: Sequence[str]) -> RankingResult:
    """Count trial wins per system; break win ties by overall mean score."""
    systems = tuple(systems)
    by_trial: dict[str, dict[str, list[int]]] = {}
    by_system: dict[str, list[int]] = {name: [] for name in systems}
    for rec in records:
        by_trial.setdefault(rec.trial_id, {}).setdefault(rec.condition, []).append(rec.score)
        if rec.condition in by_system:
            by_system[rec.condition].append(rec.score)

    incomplete = sorted(
        trial for trial, conds in by_trial.items()
        if any(not conds.get(name) for name in systems)
    )
    if incomplete:
        raise PlcError("trials missing system ratings: " + ", ".join(incomplete))
    if not by_trial:
        raise PlcError("no ratings at all")

    wins = {name: 0 for name in systems}
    per_trial_means: dict[str, dict[str, float]] = {}
    for trial, conds in sorted(by_trial.items()):
        per_trial_means[trial] = {
            name: float(np.mean(scores)) for name, scores in sorted(conds.items())
        }
        wins[trial_winner(conds)] += 1

    overall = {name: float(np.mean(by_system[name])) for name in systems}
    ci95 = {
        name: confidence_interval(by_system[name]) if len(by_system[name]) >= 2 else float("nan")
        for name in systems
    }
    ranking = tuple(sorted(systems, key=lambda name: (-wins[name], -overall[name], name)))
    return RankingResult(systems, wins, overall, per_trial_means, ci95, ranking)


def screen_assessors(
    records: Sequence[RatingRecord],
    min_reference_score: int = 90,
    max_miss_fraction: float = 0.15,
) -> tuple[list[RatingRecord], list[str]]:
    """Optional post-screening (off by default in every pipeline): drop
    assessors who rate the hidden reference below ``min_reference_score`` in
    more than ``max_miss_fraction`` of their trials."""
    ref_scores: dict[str, list[int]] = {}
    for rec in records:
        if rec.condition == REFERENCE:
            ref_scores.setdefault(rec.assessor_id, []).append(rec.score)
    excluded = sorted(
        assessor for assessor, scores in ref_scores.items()
        if sum(s < min_reference_score for s in scores) > max_miss_fraction * len(scores)
    )
    kept = [rec for rec in records if rec.assessor_id not in excluded]
    if excluded:
        log.warning("screened out assessors (low hidden-reference scores): %s", excluded)
    return kept, excluded


def resolve_ratings(
    ratings: Iterable[Rating],
    sessions: Mapping[str, MushraSession],
) -> list[RatingRecord]:
    """Map opaque condition tokens back to condition names via each assessor's session."""
    records = []
    for r in ratings:
        session = sessions.get(r.assessor_id)
        if session is None:
            raise PlcError(f"no session known for assessor {r.assessor_id!r}")
        cond = session.conditions_by_token().get(r.condition_id)
        if cond is None:
            raise PlcError(f"token {r.condition_id!r} not in assessor {r.assessor_id!r}'s session")
        records.append(RatingRecord(r.assessor_id, r.trial_id, cond.name, r.score))
    return records


def read_ratings_csv(path: str | Path) -> list[RatingRecord]:
    """CSV with resolved conditions: assessor_id, trial_id, condition, score."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(RatingRecord(
                row["assessor_id"], row["trial_id"], row["condition"], int(row["score"]),
            ))
    if not records:
        raise PlcError(f"{path}: no ratings")
    return records


def write_ratings_csv(records: Sequence[RatingRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["assessor_id", "trial_id", "condition", "score"])
        for r in records:
            writer.writerow([r.assessor_id, r.trial_id, r.condition, r.score])


def write_ranking_csv(result: RankingResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "system", "wins", "mean", "ci95"])
        for row in result.as_rows():
            writer.writerow([row["rank"], row["system"], row["wins"],
                             f"{row['mean']:.2f}", f"{row['ci95']:.2f}"])


def write_trial_means_csv(result: RankingResult, path: str | Path) -> None:
    conditions = sorted({c for means in result.per_trial_means.values() for c in means})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_id"] + conditions)
        for trial, means in sorted(result.per_trial_means.items()):
            writer.writerow([trial] + [f"{means[c]:.2f}" if c in means else "" for c in conditions])


def format_ranking_table(result: RankingResult) -> str:
    lines = [f"{'rank':<5} {'system':<20} {'wins':>5} {'mean':>8} {'ci95':>8}"]
    for row in result.as_rows():
        lines.append(
            f"{row['rank']:<5} {row['system']:<20} {row['wins']:>5} "
            f"{row['mean']:>8.2f} {row['ci95']:>8.2f}"
        )
    return "\n".join(lines) + "\n"
