"""Estimation-task protocols and their analysis.

Two task kinds are supported: the passive task, where a modified body is shown
and the participant states its weight, and the active task, where the
participant steers the body weight toward a numeric target. Misestimation is
kept as a fraction internally and reported in percent at the interfaces.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .interaction import ModMethod

LEVEL_STEP_PCT = 5
LEVEL_MAX_PCT = 20


class TaskError(Exception):
    """Invalid trial data or protocol request."""


def task_levels() -> list[int]:
    """The nine modification levels in percent of base weight, ascending."""
    return list(range(-LEVEL_MAX_PCT, LEVEL_MAX_PCT + 1, LEVEL_STEP_PCT))


def counterbalanced_order(participant_index: int, seed: int) -> list[int]:
    """Level order for one participant from a seeded Latin square.

    Rows are cyclic shifts of a seeded permutation, so across any nine
    consecutive participant indices every level occupies every serial position
    exactly once.
    """
    if participant_index < 0:
        raise TaskError("participant index must be >= 0")
    levels = task_levels()
    n = len(levels)
    rng = np.random.default_rng(seed)
    base = rng.permutation(n)
    return [levels[base[(participant_index + j) % n]] for j in range(n)]


def method_order(participant_index: int, seed: int) -> list[ModMethod]:
    """Counterbalanced order of the three modification methods."""
    methods = [ModMethod.GESTURE, ModMethod.JOYSTICK, ModMethod.OBJECTS]
    rng = np.random.default_rng(seed + 1)
    base = rng.permutation(3)
    return [methods[base[(participant_index + j) % 3]] for j in range(3)]


def pet_misestimation(estimated: float, presented: float) -> float:
    """(e - p) / p; negative means the shown body was judged lighter than it is."""
    if presented <= 0:
        raise TaskError("presented weight must be positive")
    return (estimated - presented) / presented


def amt_misestimation(modified: float, target: float) -> float:
    """(t - m) / t for a steering trial that ended at weight m."""
    if target <= 0:
        raise TaskError("target weight must be positive")
    return (target - modified) / target


@dataclass(frozen=True)
class EstimationRecord:
    """One completed estimation trial."""

    kind: str                    # "pet" | "amt"
    method: ModMethod | None     # None for passive trials
    participant: int
    trial: int
    base_weight: float           # kg
    level: int                   # percent of base weight
    shown_weight: float          # presented (pet) or target (amt) weight, kg
    response_weight: float       # estimate (pet) or final modified weight (amt), kg
    response_time: float = 0.0   # s

    def __post_init__(self):
        if self.kind not in ("pet", "amt"):
            raise TaskError(f"unknown task kind {self.kind!r}")
        if self.response_weight <= 0:
            raise TaskError("response weight must be positive")
        expected = self.base_weight * (1.0 + self.level / 100.0)
        if abs(self.shown_weight - expected) > 1e-9:
            raise TaskError(f"shown weight {self.shown_weight} inconsistent with "
                            f"level {self.level}% of base {self.base_weight}")

    @property
    def misestimation(self) -> float:
        if self.kind == "pet":
            return pet_misestimation(self.response_weight, self.shown_weight)
        return amt_misestimation(self.response_weight, self.shown_weight)

    def to_csv_row(self) -> list:
        return [self.kind, self.method.value if self.method else "",
                self.participant, self.trial, repr(self.base_weight), self.level,
                repr(self.shown_weight), repr(self.response_weight),
                repr(self.response_time)]

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "method": self.method.value if self.method else None,
            "participant": self.participant, "trial": self.trial,
            "base_kg": self.base_weight, "level_pct": self.level,
            "shown_kg": self.shown_weight, "response_kg": self.response_weight,
            "rt_s": self.response_time,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EstimationRecord":
        d = json.loads(text)
        return cls(kind=d["kind"],
                   method=ModMethod(d["method"]) if d.get("method") else None,
                   participant=int(d["participant"]), trial=int(d["trial"]),
                   base_weight=float(d["base_kg"]), level=int(d["level_pct"]),
                   shown_weight=float(d["shown_kg"]),
                   response_weight=float(d["response_kg"]),
                   response_time=float(d.get("rt_s", 0.0)))


CSV_HEADER = ["kind", "method", "participant", "trial", "base_kg", "level_pct",
              "shown_kg", "response_kg", "rt_s"]


def records_to_csv(records, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.to_csv_row())


def records_from_csv(fh) -> list[EstimationRecord]:
    out = []
    for row in csv.DictReader(fh):
        out.append(EstimationRecord(
            kind=row["kind"], method=ModMethod(row["method"]) if row["method"] else None,
            participant=int(row["participant"]), trial=int(row["trial"]),
            base_weight=float(row["base_kg"]), level=int(row["level_pct"]),
            shown_weight=float(row["shown_kg"]), response_weight=float(row["response_kg"]),
            response_time=float(row["rt_s"] or 0.0)))
    return out


@dataclass(frozen=True)
class TrialSummary:
    mean_signed: float     # fraction
    mean_absolute: float   # fraction
    n: int

    @property
    def mean_signed_pct(self) -> float:
        return 100.0 * self.mean_signed

    @property
    def mean_absolute_pct(self) -> float:
        return 100.0 * self.mean_absolute


def summarize(records) -> TrialSummary:
    records = list(records)
    if not records:
        raise TaskError("no records to summarize")
    kinds = {r.kind for r in records}
    if len(kinds) > 1:
        raise TaskError(f"mixed task kinds in one summary: {sorted(kinds)}")
    m = np.array([r.misestimation for r in records])
    return TrialSummary(mean_signed=float(m.mean()),
                        mean_absolute=float(np.abs(m).mean()), n=len(m))


def analyze_vs_level(records) -> dict:
    """Regressions of signed and absolute misestimation (%) on level (%)."""
    records = list(records)
    levels = np.array([r.level for r in records], dtype=np.float64)
    if len(np.unique(levels)) < 3:
        raise TaskError("need at least 3 distinct levels for regression")
    m_pct = 100.0 * np.array([r.misestimation for r in records])
    x = np.stack([levels, np.ones_like(levels)], axis=1)
    signed = stats.ols_hc4(x, m_pct)
    absolute = stats.ols_hc4(x, np.abs(m_pct))
    return {"signed": signed, "absolute": absolute}


def split_by_direction(records) -> dict:
    """Per-participant directional means plus paired tests between directions.

    Signed misestimation means are compared with a paired t-test, absolute means
    with a Wilcoxon signed-rank test; values are in percent.
    """
    records = list(records)
    participants = sorted({r.participant for r in records})
    neg_m, pos_m, neg_a, pos_a = [], [], [], []
    for p in participants:
        own = [r for r in records if r.participant == p]
        neg = np.array([r.misestimation for r in own if r.level < 0])
        pos = np.array([r.misestimation for r in own if r.level > 0])
        if len(neg) == 0 or len(pos) == 0:
            raise TaskError(f"participant {p} lacks trials in one direction")
        neg_m.append(neg.mean()); pos_m.append(pos.mean())
        neg_a.append(np.abs(neg).mean()); pos_a.append(np.abs(pos).mean())
    neg_m = 100.0 * np.array(neg_m); pos_m = 100.0 * np.array(pos_m)
    neg_a = 100.0 * np.array(neg_a); pos_a = 100.0 * np.array(pos_a)
    if len(participants) < 2:
        raise TaskError("paired direction tests need at least 2 participants")
    out = {
        "negative_mean_signed_pct": float(neg_m.mean()),
        "positive_mean_signed_pct": float(pos_m.mean()),
        "negative_mean_absolute_pct": float(neg_a.mean()),
        "positive_mean_absolute_pct": float(pos_a.mean()),
        "n_participants": len(participants),
    }
    try:
        out["signed_test"] = stats.paired_t_test(neg_m, pos_m)
    except stats.StatsError as exc:
        out["signed_test"] = None
        out["signed_test_note"] = str(exc)
    try:
        out["absolute_test"] = stats.wilcoxon_signed_rank(neg_a, pos_a)
    except stats.StatsError as exc:
        out["absolute_test"] = None
        out["absolute_test_note"] = str(exc)
    return out


def simulate_estimator(gain: float, reference_weight: float, noise_sd: float,
                       seed: int, base_weight: float, levels=None,
                       participants: int = 1, kind: str = "pet",
                       method: ModMethod | None = None) -> list[EstimationRecord]:
    """Records from a contraction-biased estimator.

    The simulated perceiver reports reference + gain * (true - reference) plus
    Gaussian noise with standard deviation noise_sd * true. gain < 1 pulls
    estimates toward the reference body (heavier bodies underestimated, lighter
    overestimated).
    """
    if not 0.0 <= gain <= 2.0:
        raise TaskError("gain must be in [0, 2]")
    if noise_sd < 0:
        raise TaskError("noise must be >= 0")
    if levels is None:
        levels = task_levels()
    rng = np.random.default_rng(seed)
    records = []
    for participant in range(participants):
        if set(levels) == set(task_levels()):
            trial_levels = counterbalanced_order(participant, seed)
        else:
            trial_levels = list(levels)
        for trial, level in enumerate(trial_levels):
            true = base_weight * (1.0 + level / 100.0)
            perceived = reference_weight + gain * (true - reference_weight)
            response = perceived + rng.normal(0.0, noise_sd * true) if noise_sd > 0 else perceived
            records.append(EstimationRecord(
                kind=kind, method=method, participant=participant, trial=trial,
                base_weight=base_weight, level=level, shown_weight=true,
                response_weight=float(response)))
    return records


def bmi(weight: float, height: float) -> float:
    """Body mass index, kg/m^2."""
    if height <= 0:
        raise TaskError("height must be positive")
    return weight / (height * height)


def ranking_score(rank_lists, top_weight: int = 4) -> dict:
    """Weighted preference scores from per-rater rankings.

    Each list orders items best-first. The first item earns top_weight points,
    the next one fewer, and so on; scores are averaged over raters.
    """
    rank_lists = [list(r) for r in rank_lists]
    if not rank_lists:
        raise TaskError("no rankings given")
    items = sorted(rank_lists[0])
    if top_weight < len(items):
        raise TaskError("top weight must be at least the item count")
    totals = {item: 0.0 for item in items}
    for ranking in rank_lists:
        if sorted(ranking) != items:
            raise TaskError(f"ranking {ranking!r} is not a permutation of {items!r}")
        for position, item in enumerate(ranking):
            totals[item] += top_weight - position
    return {item: total / len(rank_lists) for item, total in totals.items()}
