"""Dot-probe task: session planning, the trial state machine, gaze-to-phase
alignment, and the per-session analysis report.

Trial sequence: fixation cross (jittered 500-1500 ms), stimulus pair (2 s),
probe until keypress (5 s timeout), then the next trial; 96 trials with a
break after trial 48.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ScreenGeometry
from .metrics import (GazeSeries, MetricError, Phase, Roi, Side, jitter,
                      roi_accuracy, side_agreement)

N_TRIALS = 96
BREAK_AFTER = 48
STIMULUS_MS = 2000
FIXATION_RANGE_MS = (500, 1500)
# transitions are tick-quantized; keep drawn durations this far below the
# upper bound so recorded durations stay inside FIXATION_RANGE_MS
FIXATION_FRAME_RESERVE_MS = 20
PROBE_TIMEOUT_MS = 5000

# stimulus layout: rect centers at 25%/75% of width, 50% of height
STIM_SIZE_FRAC = (0.30, 0.40)
STIM_CENTER_X = (0.25, 0.75)


class SessionPlanError(ValueError):
    pass


@dataclass(frozen=True)
class TrialSpec:
    index: int
    left_id: str
    right_id: str
    negative_side: Side
    probe_side: Side
    rect_left: tuple[float, float, float, float]
    rect_right: tuple[float, float, float, float]


@dataclass(frozen=True)
class SessionPlan:
    trials: tuple[TrialSpec, ...]
    break_after: int = BREAK_AFTER
    screen: ScreenGeometry = None


@dataclass
class TrialRecord:
    spec: TrialSpec
    fixation_on: int
    fixation_off: int
    stimulus_on: int
    stimulus_off: int
    probe_on: int
    probe_off: int
    response_key: Optional[str]
    response_time_ms: Optional[int]
    anticipatory: list = field(default_factory=list)  # (key, t_ms) outside probe
    phase_sample_counts: Optional[dict] = None
    screen: Optional[tuple[int, int]] = None

    def to_dict(self) -> dict:
        return {
            "trial": self.spec.index,
            "screen": list(self.screen) if self.screen else None,
            "left_id": self.spec.left_id,
            "right_id": self.spec.right_id,
            "negative_side": self.spec.negative_side.value,
            "probe_side": self.spec.probe_side.value,
            "rect_left": list(self.spec.rect_left),
            "rect_right": list(self.spec.rect_right),
            "fixation_on": self.fixation_on,
            "fixation_off": self.fixation_off,
            "stimulus_on": self.stimulus_on,
            "stimulus_off": self.stimulus_off,
            "probe_on": self.probe_on,
            "probe_off": self.probe_off,
            "response_key": self.response_key,
            "response_time_ms": self.response_time_ms,
            "anticipatory": [list(a) for a in self.anticipatory],
            "phase_sample_counts": self.phase_sample_counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        spec = TrialSpec(
            index=d["trial"], left_id=d["left_id"], right_id=d["right_id"],
            negative_side=Side(d["negative_side"]), probe_side=Side(d["probe_side"]),
            rect_left=tuple(d["rect_left"]), rect_right=tuple(d["rect_right"]))
        return cls(spec=spec, fixation_on=d["fixation_on"], fixation_off=d["fixation_off"],
                   stimulus_on=d["stimulus_on"], stimulus_off=d["stimulus_off"],
                   probe_on=d["probe_on"], probe_off=d["probe_off"],
                   response_key=d.get("response_key"),
                   response_time_ms=d.get("response_time_ms"),
                   anticipatory=[tuple(a) for a in d.get("anticipatory", [])],
                   phase_sample_counts=d.get("phase_sample_counts"),
                   screen=tuple(d["screen"]) if d.get("screen") else None)


def load_catalog(root, require_images: bool = True):
    """Read a stimulus catalog: a directory of images plus ``pairs.csv``
    with ``negative_id,neutral_id`` rows (placeholder images are fine)."""
    import csv
    from pathlib import Path

    root = Path(root)
    pairs_file = root / "pairs.csv"
    if not pairs_file.exists():
        raise SessionPlanError(f"missing {pairs_file}")
    pairs = []
    with pairs_file.open(newline="") as fh:
        for row_no, row in enumerate(csv.DictReader(fh), start=2):
            try:
                neg, neu = row["negative_id"], row["neutral_id"]
            except KeyError as exc:
                raise SessionPlanError(f"pairs.csv row {row_no}: missing column {exc}") from exc
            if require_images:
                for name in (neg, neu):
                    if not (root / name).exists():
                        raise SessionPlanError(f"pairs.csv row {row_no}: missing image {name}")
            pairs.append((neg, neu))
    return pairs


def stimulus_rects(screen: ScreenGeometry):
    """Left/right stimulus rects, symmetric about the vertical midline."""
    w, h = screen.width_px, screen.height_px
    sw, sh = STIM_SIZE_FRAC[0] * w, STIM_SIZE_FRAC[1] * h
    rects = []
    for cx_frac in STIM_CENTER_X:
        cx, cy = cx_frac * w, 0.5 * h
        rects.append((cx - sw / 2, cy - sh / 2, cx + sw / 2, cy + sh / 2))
    return tuple(rects)


def build_session(catalog, screen: ScreenGeometry, seed: int = 0,
                  n_trials: int = N_TRIALS, break_after: int = BREAK_AFTER) -> SessionPlan:
    """Deterministic session plan from a (negative_id, neutral_id) catalog.

    The negative stimulus appears on each side in exactly half the trials.
    """
    pairs = list(catalog)
    if len(pairs) < n_trials:
        raise SessionPlanError(f"catalog has {len(pairs)} pairs, need {n_trials}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))[:n_trials]
    neg_sides = np.array([Side.LEFT] * (n_trials // 2) +
                         [Side.RIGHT] * (n_trials - n_trials // 2), dtype=object)
    rng.shuffle(neg_sides)
    probe_sides = np.array([Side.LEFT] * (n_trials // 2) +
                           [Side.RIGHT] * (n_trials - n_trials // 2), dtype=object)
    rng.shuffle(probe_sides)
    rect_left, rect_right = stimulus_rects(screen)
    trials = []
    for i, pi in enumerate(order):
        neg_id, neu_id = pairs[pi]
        neg = neg_sides[i]
        left_id, right_id = (neg_id, neu_id) if neg == Side.LEFT else (neu_id, neg_id)
        trials.append(TrialSpec(index=i, left_id=str(left_id), right_id=str(right_id),
                                negative_side=neg, probe_side=probe_sides[i],
                                rect_left=rect_left, rect_right=rect_right))
    return SessionPlan(trials=tuple(trials), break_after=break_after, screen=screen)


# ---------------------------------------------------------------------------
# state machine

@dataclass(frozen=True)
class Tick:
    t_ms: int


@dataclass(frozen=True)
class KeyPress:
    key: str
    t_ms: int


@dataclass
class StepResult:
    phase: str
    record: Optional[TrialRecord] = None
    break_started: bool = False
    done: bool = False


class DotProbeMachine:
    """Event-driven trial sequencer; records are emitted once per trial.

    Keypresses outside the probe phase are logged as anticipatory and never
    cause a transition. The probe phase times out after ``timeout_ms`` so the
    machine cannot deadlock; the break ends on any keypress.
    """

    IDLE = "idle"
    FIXATION = "fixation"
    STIMULUS = "stimulus"
    PROBE = "probe"
    BREAK = "break"
    DONE = "done"

    def __init__(self, plan: SessionPlan, seed: int = 0,
                 timeout_ms: int = PROBE_TIMEOUT_MS):
        self.plan = plan
        self.timeout_ms = timeout_ms
        rng = np.random.default_rng(seed)
        lo, hi = FIXATION_RANGE_MS
        self._fix_durations = rng.uniform(lo, hi - FIXATION_FRAME_RESERVE_MS,
                                          size=len(plan.trials))
        self.phase = self.IDLE
        self._trial = 0
        self._fix_on = 0
        self._stim_on = 0
        self._probe_on = 0
        self._anticipatory: list = []
        self.records: list[TrialRecord] = []

    def _start_fixation(self, t_ms: int):
        self.phase = self.FIXATION
        self._fix_on = t_ms
        self._anticipatory = []

    def _emit(self, t_ms: int, key: Optional[str], rt: Optional[int]) -> TrialRecord:
        screen = self.plan.screen
        rec = TrialRecord(
            spec=self.plan.trials[self._trial],
            fixation_on=self._fix_on, fixation_off=self._stim_on,
            stimulus_on=self._stim_on, stimulus_off=self._probe_on,
            probe_on=self._probe_on, probe_off=t_ms,
            response_key=key, response_time_ms=rt,
            anticipatory=list(self._anticipatory),
            screen=(screen.width_px, screen.height_px) if screen else None)
        self.records.append(rec)
        return rec

    def _finish_trial(self, t_ms: int, key, rt) -> StepResult:
        rec = self._emit(t_ms, key, rt)
        self._trial += 1
        if self._trial >= len(self.plan.trials):
            self.phase = self.DONE
            return StepResult(self.phase, record=rec, done=True)
        if self._trial == self.plan.break_after:
            self.phase = self.BREAK
            return StepResult(self.phase, record=rec, break_started=True)
        self._start_fixation(t_ms)
        return StepResult(self.phase, record=rec)

    def advance(self, event) -> StepResult:
        if isinstance(event, Tick):
            return self.tick(event.t_ms)
        if isinstance(event, KeyPress):
            return self.keypress(event.key, event.t_ms)
        raise TypeError(f"unknown event {event!r}")

    def tick(self, t_ms: int) -> StepResult:
        if self.phase == self.IDLE:
            self._start_fixation(t_ms)
        elif self.phase == self.FIXATION:
            if t_ms >= self._fix_on + self._fix_durations[self._trial]:
                self.phase = self.STIMULUS
                self._stim_on = t_ms
        elif self.phase == self.STIMULUS:
            if t_ms >= self._stim_on + STIMULUS_MS:
                self.phase = self.PROBE
                self._probe_on = t_ms
        elif self.phase == self.PROBE:
            if t_ms >= self._probe_on + self.timeout_ms:
                return self._finish_trial(t_ms, None, None)
        return StepResult(self.phase)

    def keypress(self, key: str, t_ms: int) -> StepResult:
        if self.phase == self.PROBE:
            return self._finish_trial(t_ms, key, t_ms - self._probe_on)
        if self.phase == self.BREAK:
            self._start_fixation(t_ms)
            return StepResult(self.phase)
        if self.phase in (self.FIXATION, self.STIMULUS):
            self._anticipatory.append((key, t_ms))
        return StepResult(self.phase)


# ---------------------------------------------------------------------------
# alignment and analysis

def align_gaze(records, t_ms, x, y, valid, screen: ScreenGeometry,
               source: str = "") -> GazeSeries:
    """Label every gaze sample with (trial, phase) by timestamp containment.

    Samples outside all phase intervals stay inter-trial. Per-phase sample
    counts are attached to each record.
    """
    series = GazeSeries(t_ms=np.asarray(t_ms), x=np.asarray(x), y=np.asarray(y),
                        valid=np.asarray(valid), screen=screen, source=source)
    intervals = []  # (start, end, trial, phase)
    for rec in records:
        intervals.append((rec.fixation_on, rec.fixation_off, rec.spec.index, Phase.FIXATION))
        intervals.append((rec.stimulus_on, rec.stimulus_off, rec.spec.index, Phase.STIMULUS))
        intervals.append((rec.probe_on, rec.probe_off, rec.spec.index, Phase.PROBE))
    intervals.sort(key=lambda iv: iv[0])
    starts = np.array([iv[0] for iv in intervals], dtype=np.int64)
    counts: dict[tuple[int, Phase], int] = {}
    for i, ts in enumerate(series.t_ms):
        pos = int(np.searchsorted(starts, ts, side="right")) - 1
        if pos >= 0:
            s, e, trial, phase = intervals[pos]
            if s <= ts < e:
                series.trial[i] = trial
                series.phase[i] = int(phase)
                counts[(trial, phase)] = counts.get((trial, phase), 0) + 1
    for rec in records:
        rec.phase_sample_counts = {
            "fixation": counts.get((rec.spec.index, Phase.FIXATION), 0),
            "stimulus": counts.get((rec.spec.index, Phase.STIMULUS), 0),
            "probe": counts.get((rec.spec.index, Phase.PROBE), 0),
        }
    return series


def _dwell_fractions(series: GazeSeries, records) -> list[dict]:
    """Per-trial left/right screen-half dwell over stimulus-phase samples.

    The denominator includes invalid samples, so left + right <= 1.
    """
    half = series.screen.width_px / 2
    out = []
    for rec in records:
        in_trial = (series.trial == rec.spec.index) & (series.phase == int(Phase.STIMULUS))
        total = int(in_trial.sum())
        vmask = in_trial & series.valid
        left = int((series.x[vmask] < half).sum())
        right = int(vmask.sum()) - left
        out.append({
            "trial": rec.spec.index,
            "left": left / total if total else 0.0,
            "right": right / total if total else 0.0,
        })
    return out


def analyze_session(series_a: GazeSeries, series_b: Optional[GazeSeries],
                    records, margins=(0.0, 0.05, 0.10)) -> dict:
    """Table-style session report; delegates each measure to metrics."""
    trial_rois = {rec.spec.index: (Roi(rec.spec.rect_left), Roi(rec.spec.rect_right))
                  for rec in records}
    report: dict = {"n_trials": len(records), "sources": [series_a.source or "a"]}
    if series_b is not None:
        report["sources"].append(series_b.source or "b")
        report["side_agreement"] = side_agreement(series_a, series_b)
    else:
        report["side_agreement"] = None

    roi_table = {}
    jitter_table = {}
    dwell_table = {}
    for series in filter(None, (series_a, series_b)):
        tag = series.source or ("a" if series is series_a else "b")
        roi_table[tag] = {f"{m:.2f}": roi_accuracy(series, trial_rois, m) for m in margins}
        try:
            jitter_table[tag] = jitter(series, phase=Phase.STIMULUS)
        except MetricError:
            jitter_table[tag] = None
        dwell_table[tag] = _dwell_fractions(series, records)
    report["roi_accuracy"] = roi_table
    report["jitter_px"] = jitter_table
    report["dwell"] = dwell_table
    return report
