"""Session service: owns the authoritative weight state, the trial plan, and the
append-only session log.

Every mutation is an event; the log replays to exactly the same state, which is
what the crash-restart and determinism guarantees rest on. Transport lives in
``server``; this module is plain Python and fully testable without HTTP.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import interaction, tasks
from .stats import StatsError
from .interaction import InputSample, ModMethod, WeightState
from .shapemodel import MorphTable, ShapeModel, precompute_morph_targets
from .tasks import EstimationRecord

DEFAULT_MORPH_SPACING_KG = 1.0


class ServiceError(Exception):
    """Client-visible request failure."""


class ProtocolError(ServiceError):
    """Request violates the session's trial protocol."""


@dataclass(frozen=True)
class TrialPlanEntry:
    kind: str                    # "pet" | "amt"
    method: ModMethod | None
    level: int

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "method": self.method.value if self.method else None,
                "level": self.level}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialPlanEntry":
        return cls(kind=d["kind"],
                   method=ModMethod(d["method"]) if d.get("method") else None,
                   level=int(d["level"]))


def build_plan(participant: int, seed: int, protocol: str) -> list[TrialPlanEntry]:
    """Counterbalanced trial plan.

    "full": passive block, one active block per method, passive block again.
    "pet" / "amt": a single block.
    """
    pet_block = [TrialPlanEntry("pet", None, lv)
                 for lv in tasks.counterbalanced_order(participant, seed)]
    if protocol == "pet":
        return pet_block
    if protocol == "amt":
        plan = []
        for m_i, method in enumerate(tasks.method_order(participant, seed)):
            for lv in tasks.counterbalanced_order(participant, seed + 2 + m_i):
                plan.append(TrialPlanEntry("amt", method, lv))
        return plan
    if protocol == "full":
        plan = list(pet_block)
        for m_i, method in enumerate(tasks.method_order(participant, seed)):
            for lv in tasks.counterbalanced_order(participant, seed + 2 + m_i):
                plan.append(TrialPlanEntry("amt", method, lv))
        plan.extend(TrialPlanEntry("pet", None, lv)
                    for lv in tasks.counterbalanced_order(participant, seed + 7))
        return plan
    raise ServiceError(f"unknown protocol {protocol!r}")


class Session:
    """One participant session; all mutations flow through ``_dispatch``."""

    def __init__(self, header: dict, log_path: Path, persist: bool = True):
        self.header = header
        self.log_path = log_path
        self.plan = [TrialPlanEntry.from_dict(d) for d in header["plan"]]
        self.trial_index = 0
        self.records: list[EstimationRecord] = []
        self.weight_state: WeightState | None = None
        self.presented_level: int | None = None
        self.trial_start_t: float = 0.0
        self.last_t: float = -np.inf
        self.lock = threading.Lock()
        self._persist = persist
        if persist:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(log_path, "x", encoding="ascii") as fh:
                fh.write(json.dumps({"type": "header", **header}, sort_keys=True) + "\n")
        self._enter_trial()

    # -- state helpers ------------------------------------------------------

    @property
    def session_id(self) -> str:
        return self.header["id"]

    @property
    def base_weight(self) -> float:
        return float(self.header["base_weight"])

    @property
    def completed(self) -> bool:
        return self.trial_index >= len(self.plan)

    def current_trial(self) -> TrialPlanEntry | None:
        return None if self.completed else self.plan[self.trial_index]

    def _enter_trial(self) -> None:
        trial = self.current_trial()
        self.presented_level = None
        if trial is not None and trial.kind == "amt":
            self.weight_state = WeightState.initial(self.base_weight, trial.method)
        else:
            self.weight_state = None

    def trial_descriptor(self) -> dict:
        """Client-facing view of the current trial; never contains the passive
        trial's presented weight."""
        trial = self.current_trial()
        if trial is None:
            return {"status": "completed", "trial_index": self.trial_index,
                    "trial_count": len(self.plan)}
        d = {"status": "running", "trial_index": self.trial_index,
             "trial_count": len(self.plan), "kind": trial.kind,
             "method": trial.method.value if trial.method else None}
        if trial.kind == "amt":
            d["target_kg"] = self.base_weight * (1.0 + trial.level / 100.0)
            d["current_kg"] = self.weight_state.weight
            d["presented"] = None
        else:
            d["presented"] = self.presented_level is not None
        return d

    # -- event log ----------------------------------------------------------

    def _append(self, event: dict) -> None:
        if self._persist:
            with open(self.log_path, "a", encoding="ascii") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _check_time(self, t: float) -> None:
        if not np.isfinite(t) or t <= self.last_t:
            raise ProtocolError(f"timestamp {t} not after {self.last_t}")

    # -- mutations ----------------------------------------------------------

    def stream_input(self, sample: InputSample) -> float:
        trial = self.current_trial()
        if trial is None:
            raise ProtocolError("session completed")
        if trial.kind != "amt":
            raise ProtocolError("inputs are rejected during passive trials")
        self._check_time(sample.timestamp)
        try:
            self.weight_state = interaction.step(self.weight_state, sample)
        except interaction.InteractionError as exc:
            raise ProtocolError(str(exc)) from exc
        self.last_t = sample.timestamp
        self._append({"type": "input", **json.loads(sample.to_json())})
        self._append({"type": "weight", "t": sample.timestamp,
                      "kg": self.weight_state.weight})
        return self.weight_state.weight

    def set_presented_level(self, t: float, level: int) -> float:
        trial = self.current_trial()
        if trial is None:
            raise ProtocolError("session completed")
        if trial.kind != "pet":
            raise ProtocolError("presented level applies only to passive trials")
        if level != trial.level:
            raise ProtocolError(f"level {level} is not the planned level of this trial")
        self._check_time(t)
        self.presented_level = level
        self.trial_start_t = t
        self.last_t = t
        self._append({"type": "level", "t": t, "level": level})
        return self.base_weight * (1.0 + level / 100.0)

    def submit_estimate(self, t: float, response_kg: float) -> dict:
        trial = self.current_trial()
        if trial is None:
            raise ProtocolError("session completed")
        if response_kg <= 0:
            raise ServiceError("estimate must be positive")
        self._check_time(t)
        shown = self.base_weight * (1.0 + trial.level / 100.0)
        if trial.kind == "pet":
            if self.presented_level is None:
                raise ProtocolError("no body presented yet for this trial")
            response = float(response_kg)
        else:
            # the confirmed response is the server-side modified weight
            response = float(self.weight_state.weight)
        record = EstimationRecord(
            kind=trial.kind, method=trial.method, participant=self.header["participant"],
            trial=self.trial_index, base_weight=self.base_weight, level=trial.level,
            shown_weight=shown, response_weight=response,
            response_time=max(0.0, t - self.trial_start_t))
        self.records.append(record)
        self.last_t = t
        self._append({"type": "estimate", "t": t,
                      "record": json.loads(record.to_json())})
        self.trial_index += 1
        self.trial_start_t = t
        self._enter_trial()
        return {"trial_index": self.trial_index, "completed": self.completed}

    # -- restore -------------------------------------------------------------

    @classmethod
    def restore(cls, log_path: Path) -> "Session":
        with open(log_path, "r", encoding="ascii") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines or lines[0].get("type") != "header":
            raise ServiceError(f"{log_path}: not a session log")
        header = {k: v for k, v in lines[0].items() if k != "type"}
        session = cls(header, log_path, persist=False)
        for event in lines[1:]:
            kind = event["type"]
            if kind == "input":
                session.stream_input(InputSample.from_json(
                    json.dumps({k: v for k, v in event.items() if k != "type"})))
            elif kind == "level":
                session.set_presented_level(event["t"], event["level"])
            elif kind == "estimate":
                rec = EstimationRecord.from_json(json.dumps(event["record"]))
                session.submit_estimate(event["t"], rec.response_weight)
            elif kind == "weight":
                # snapshots are derived data; replay must agree with them
                if abs(event["kg"] - session.weight_state.weight) > 1e-9:
                    raise ServiceError(f"{log_path}: stored weight snapshot "
                                       f"diverges at t={event['t']}")
        session._persist = True
        return session


class Service:
    """Model store plus session registry with file-backed persistence."""

    def __init__(self, data_dir, morph_spacing_kg: float = DEFAULT_MORPH_SPACING_KG):
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.morph_spacing_kg = morph_spacing_kg
        self.models: dict[str, ShapeModel] = {}
        self._assets: dict[str, dict] = {}
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    # -- models --------------------------------------------------------------

    def register_model(self, model_id: str, model: ShapeModel) -> None:
        if model.base_anthro is None:
            raise ServiceError(f"model {model_id!r} lacks base measurements")
        self.models[model_id] = model

    def _model(self, model_id: str) -> ShapeModel:
        try:
            return self.models[model_id]
        except KeyError:
            raise ServiceError(f"unknown model {model_id!r}") from None

    def get_morph_assets(self, model_id: str) -> dict:
        """Base mesh, weight-delta grid spanning +-35% of base weight, and one
        vertex buffer per grid sample. Heavy; meant to be fetched once."""
        cached = self._assets.get(model_id)
        if cached is not None:
            return cached
        model = self._model(model_id)
        base_weight = model.base_anthro.weight
        limit = interaction.WEIGHT_RANGE_FRACTION * base_weight
        inner = int(np.floor(limit / self.morph_spacing_kg))
        deltas = np.unique(np.concatenate([
            [-limit], self.morph_spacing_kg * np.arange(-inner, inner + 1), [limit]]))
        base_mesh = model.mean_mesh()
        table = precompute_morph_targets(model, base_mesh, deltas)
        assets = {
            "model_id": model_id,
            "base_weight_kg": base_weight,
            "bounds_kg": [base_weight - limit, base_weight + limit],
            "vertex_count": base_mesh.vertex_count,
            "faces": base_mesh.faces.tolist(),
            "base_vertices": base_mesh.vertices.tolist(),
            "delta_grid_kg": table.samples.tolist(),
            "buffers": [buf.tolist() for buf in table.buffers],
        }
        self._assets[model_id] = assets
        return assets

    # -- sessions ------------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def create_session(self, participant: int, base_weight: float, model_id: str,
                       protocol: str = "full", seed: int = 0) -> str:
        if base_weight <= 0:
            raise ServiceError("base weight must be positive")
        self._model(model_id)
        plan = build_plan(participant, seed, protocol)
        session_id = uuid.uuid4().hex[:12]
        header = {
            "id": session_id, "participant": int(participant),
            "base_weight": float(base_weight), "model_id": model_id,
            "protocol": protocol, "seed": int(seed),
            "plan": [t.to_dict() for t in plan],
        }
        session = Session(header, self._session_path(session_id))
        with self._lock:
            self.sessions[session_id] = session
        return session_id

    def session(self, session_id: str) -> Session:
        with self._lock:
            existing = self.sessions.get(session_id)
        if existing is not None:
            return existing
        path = self._session_path(session_id)
        if not path.exists():
            raise ServiceError(f"unknown session {session_id!r}")
        session = Session.restore(path)
        with self._lock:
            return self.sessions.setdefault(session_id, session)

    def stream_input(self, session_id: str, sample: InputSample) -> float:
        session = self.session(session_id)
        with session.lock:
            return session.stream_input(sample)

    def set_presented_level(self, session_id: str, t: float, level: int) -> float:
        session = self.session(session_id)
        with session.lock:
            return session.set_presented_level(t, level)

    def presentation_payload(self, session_id: str, t: float, level: int) -> dict:
        """Streamed message for a passive presentation: grid indices and a blend
        factor only, never the presented weight itself."""
        session = self.session(session_id)
        presented = self.set_presented_level(session_id, t, level)
        assets = self.get_morph_assets(session.header["model_id"])
        grid = np.asarray(assets["delta_grid_kg"])
        delta = presented - assets["base_weight_kg"]
        delta = min(max(delta, grid[0]), grid[-1])
        hi = int(np.searchsorted(grid, delta))
        hi = min(max(hi, 1), len(grid) - 1)
        lo = hi - 1
        alpha = float((delta - grid[lo]) / (grid[hi] - grid[lo]))
        return {"type": "morph", "t": t, "lo": lo, "hi": hi, "alpha": alpha}

    def submit_estimate(self, session_id: str, t: float, response_kg: float) -> dict:
        session = self.session(session_id)
        with session.lock:
            return session.submit_estimate(t, response_kg)

    def get_results(self, session_id: str) -> dict:
        session = self.session(session_id)
        with session.lock:
            if not session.records:
                raise ServiceError("session has no completed trials")
            return build_report(session.records)

    def export_log(self, session_id: str) -> str:
        session = self.session(session_id)
        with session.lock:
            return session.log_path.read_text(encoding="ascii")


# ---------------------------------------------------------------------------
# reporting (shared with the CLI so both produce identical output)

def build_report(records) -> dict:
    """Summary statistics, per-method breakdown, and level regressions."""
    records = list(records)
    report: dict = {"n_records": len(records), "by_kind": {}}
    for kind in ("pet", "amt"):
        subset = [r for r in records if r.kind == kind]
        if not subset:
            continue
        entry: dict = {"n": len(subset)}
        summary = tasks.summarize(subset)
        entry["mean_signed_pct"] = summary.mean_signed_pct
        entry["mean_absolute_pct"] = summary.mean_absolute_pct
        try:
            regs = tasks.analyze_vs_level(subset)
            entry["regression"] = {"signed": regs["signed"].to_dict(),
                                   "absolute": regs["absolute"].to_dict()}
        except (tasks.TaskError, StatsError) as exc:
            entry["regression"] = {"unavailable": str(exc)}
        report["by_kind"][kind] = entry
    amt = [r for r in records if r.kind == "amt"]
    by_method = {}
    for method in ModMethod:
        subset = [r for r in amt if r.method is method]
        if subset:
            summary = tasks.summarize(subset)
            by_method[method.value] = {
                "n": len(subset),
                "mean_signed_pct": summary.mean_signed_pct,
                "mean_absolute_pct": summary.mean_absolute_pct,
            }
    if by_method:
        report["amt_by_method"] = by_method
    return report


def records_from_session_log(text: str) -> list[EstimationRecord]:
    """Extract the completed-trial records from an exported session log."""
    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        event = json.loads(line)
        if event.get("type") == "estimate":
            records.append(EstimationRecord.from_json(json.dumps(event["record"])))
    return records


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
