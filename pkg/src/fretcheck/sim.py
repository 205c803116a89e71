"""Discrete-time thrust control loop with sensor-fault injection.

The plant is a first-order lag driven by a PI controller (or, for tests, by
the setpoint directly), integrated with forward Euler. The controller reads
the sensed value, holding the last available reading through dropouts.
Besides the raw signals the simulator derives the boolean atoms used by
the engine requirements and per-setpoint-step performance metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .model import BOOL, NUMERIC
from .traces import Trace

EPS = 1e-9
FAULT_KINDS = ("bias", "dropout")
CONTROLLERS = ("pi", "direct")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Fault:
    start: float
    end: float
    kind: str
    delta: float = 0.0  # relative bias, bias faults only


@dataclass(frozen=True)
class Scenario:
    duration_seconds: float
    timestep_seconds: float = 0.01
    tau: float = 0.5
    kp: float = 2.0
    ki: float = 1.0
    controller: str = "pi"
    nominal_value: float = 0.0  # initial setpoint and plant output
    pilot_schedule: tuple = ()  # (time, setpoint)
    R: float = 0.05
    faults: tuple = ()
    mode_schedule: tuple = ()  # (time, mode id)
    initial_mode: float = 0.0
    speed_gain: float = 1.0
    speed_limit: float = math.inf
    e: float = 0.02
    E: float = 0.1
    settlingTimeMax: float = 2.0
    overshoot_max: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "pilot_schedule",
                           tuple((float(t), float(v)) for t, v in self.pilot_schedule))
        object.__setattr__(self, "mode_schedule",
                           tuple((float(t), float(m)) for t, m in self.mode_schedule))
        object.__setattr__(self, "faults",
                           tuple(f if isinstance(f, Fault) else Fault(**f) for f in self.faults))
        self.validate()

    def validate(self):
        def fail(msg):
            raise ScenarioError(msg)

        finite = ("duration_seconds", "timestep_seconds", "tau", "kp", "ki", "nominal_value", "R",
                  "speed_gain", "e", "E", "settlingTimeMax", "overshoot_max", "initial_mode")
        for name in finite:
            if not math.isfinite(getattr(self, name)):
                fail(f"{name} must be finite")
        if not self.tau > 0:
            fail("tau must be positive")
        if not self.timestep_seconds > 0:
            fail("timestep must be positive")
        if self.duration_seconds < self.timestep_seconds:
            fail("duration must be at least one timestep")
        if not 0 < self.e < self.E:
            fail("objective thresholds need 0 < e < E")
        if self.R < 0:
            fail("deviation fraction R must be non-negative")
        if self.controller not in CONTROLLERS:
            fail(f"controller must be one of {CONTROLLERS}")
        if math.isnan(self.speed_limit):
            fail("speed_limit must be a number")
        for label, sched in (("pilot", self.pilot_schedule), ("mode", self.mode_schedule)):
            times = [t for t, _ in sched]
            if any(not 0 <= t <= self.duration_seconds for t in times):
                fail(f"{label} schedule times must lie within the duration")
            if any(b <= a for a, b in zip(times, times[1:])):
                fail(f"{label} schedule times must be strictly increasing")
            if any(not math.isfinite(v) for _, v in sched):
                fail(f"{label} schedule values must be finite")
        spans = sorted((f.start, f.end) for f in self.faults)
        for f in self.faults:
            if f.kind not in FAULT_KINDS:
                fail(f"unknown fault kind {f.kind!r}")
            if not 0 <= f.start <= f.end <= self.duration_seconds:
                fail("fault intervals must satisfy 0 <= start <= end <= duration")
            if not math.isfinite(f.delta) or f.delta <= -1:
                fail("bias delta must be finite and greater than -1")
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 <= a1:
                fail("fault injections overlap")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration_seconds / self.timestep_seconds + EPS)) + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pilot_schedule"] = [list(p) for p in self.pilot_schedule]
        d["mode_schedule"] = [list(p) for p in self.mode_schedule]
        d["faults"] = [asdict(f) for f in self.faults]
        if math.isinf(self.speed_limit):
            del d["speed_limit"]
        return d

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario JSON must be an object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known - {"description"}
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        if "duration_seconds" not in d:
            raise ScenarioError("scenario needs duration_seconds")
        args = {k: v for k, v in d.items() if k in known}
        try:
            for k, v in args.items():
                if k not in ("pilot_schedule", "mode_schedule", "faults", "controller"):
                    args[k] = float(v)
            return cls(**args)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"invalid scenario: {exc}") from None


def load_scenario(source: Union[str, Path, dict]) -> Scenario:
    if isinstance(source, dict):
        return Scenario.from_dict(source)
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from None
    return Scenario.from_dict(doc)


def step_index(time: float, dt: float) -> int:
    """First step at or after `time`."""
    return int(math.ceil(time / dt - EPS))


def injection_steps(fault: Fault, dt: float) -> range:
    """Steps whose time lies in [start, end], inclusive at both ends."""
    return range(step_index(fault.start, dt), int(math.floor(fault.end / dt + EPS)) + 1)


@dataclass
class StepMetrics:
    step_index: int
    step_time: float
    delta: float
    settlingTime: Optional[float]
    overshoot: float
    steadyStateError: float
    complete: bool

    def to_dict(self) -> dict:
        return asdict(self)


def window_metrics(y: Sequence[float], r: Sequence[float], start: int, end: int, delta: float,
                   e: float, dt: float, ref: Optional[float] = None):
    """(settlingTime, overshoot, steadyStateError) of y over steps start..end.

    The settle band is e*ref, with ref = |delta| unless given. Settling time
    is None when the window ends outside the band.
    """
    ref = abs(delta) if ref is None else ref
    band = e * ref
    settle = None
    for k in range(end, start - 1, -1):
        if abs(y[k] - r[k]) > band:
            break
        settle = k
    settling = None if settle is None else (settle - start) * dt
    if delta != 0:
        sign = 1.0 if delta > 0 else -1.0
        peak = max((y[k] - r[k]) * sign for k in range(start, end + 1))
        overshoot = max(0.0, peak) / abs(delta)
    else:
        overshoot = 0.0
    return settling, overshoot, abs(y[end] - r[end])


def metrics(y: Sequence[float], r: Sequence[float], step_time: float, params: dict):
    """Metrics of a setpoint step at `step_time` over the rest of the series.

    `params` holds `e` (settle band fraction) and `timestep`, and optionally
    `delta`, the step size (default: the jump in r, or r - y at step 0).
    """
    dt = params["timestep"]
    k = step_index(step_time, dt)
    if not 0 <= k < len(y):
        raise ValueError("step time outside the series")
    delta = params.get("delta")
    if delta is None:
        delta = r[k] - (r[k - 1] if k > 0 else y[k])
    return window_metrics(y, r, k, len(y) - 1, delta, params["e"], dt)


@dataclass
class SimOutput:
    trace: Trace
    metrics: list = field(default_factory=list)
    injections: list = field(default_factory=list)

    def metrics_json(self) -> str:
        doc = {"metrics": [m.to_dict() for m in self.metrics], "injections": self.injections}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def simulate(scn: Scenario) -> SimOutput:
    dt = scn.timestep_seconds
    n = scn.n_steps
    times = [k * dt for k in range(n)]

    r = [scn.nominal_value] * n
    changes = {}
    for t, v in scn.pilot_schedule:
        changes[step_index(t, dt)] = v
    cur = scn.nominal_value
    for k in range(n):
        cur = changes.get(k, cur)
        r[k] = cur

    mode = [scn.initial_mode] * n
    mchanges = {step_index(t, dt): m for t, m in scn.mode_schedule}
    cur = scn.initial_mode
    for k in range(n):
        cur = mchanges.get(k, cur)
        mode[k] = cur

    bias = [0.0] * n
    dropout = [False] * n
    injections = []
    for f in sorted(scn.faults, key=lambda f: f.start):
        steps = [k for k in injection_steps(f, dt) if k < n]
        for k in steps:
            if f.kind == "bias":
                bias[k] = f.delta
            else:
                dropout[k] = True
        injections.append({"kind": f.kind, "start": f.start, "end": f.end, "delta": f.delta,
                           "first_step": steps[0] if steps else None,
                           "last_step": steps[-1] if steps else None})

    y = [0.0] * n
    y_meas = [0.0] * n
    u = [0.0] * n
    yk = scn.nominal_value
    integ = scn.nominal_value  # ki * integral of error, offset so the start is an equilibrium
    held = yk
    for k in range(n):
        y[k] = yk
        meas = math.nan if dropout[k] else yk * (1.0 + bias[k])
        y_meas[k] = meas
        if not math.isnan(meas):
            held = meas
        if scn.controller == "direct":
            uk = r[k]
        else:
            err = r[k] - held
            uk = scn.kp * err + integ
            integ += scn.ki * err * dt
        u[k] = uk
        yk = yk + dt * (uk - yk) / scn.tau

    sensorfaults = [math.isnan(m) or abs(m - v) / max(abs(v), EPS) > scn.R
                    for m, v in zip(y_meas, y)]
    pilot = [r[k] != (r[k - 1] if k > 0 else scn.nominal_value) for k in range(n)]

    # setpoint windows: steps where r changes open a new window
    starts = [k for k in range(n) if pilot[k]]
    bounds = []
    if not starts or starts[0] > 0:
        bounds.append((0, (starts[0] - 1) if starts else n - 1, None))
    for i, s in enumerate(starts):
        end = starts[i + 1] - 1 if i + 1 < len(starts) else n - 1
        bounds.append((s, end, i))

    tracking = [False] * n
    objectives = [False] * n
    settling_col = [math.nan] * n
    out_metrics = []
    for start, end, idx in bounds:
        if idx is None:
            delta = 0.0
            ref = abs(r[start]) if r[start] != 0 else 1.0
        else:
            prev = r[start - 1] if start > 0 else scn.nominal_value
            delta = r[start] - prev
            ref = abs(delta)
        settling, overshoot, sse = window_metrics(y, r, start, end, delta, scn.e, dt, ref)
        if idx is not None:
            for k in range(start, end + 1):
                if abs(y[k] - r[k]) <= scn.e * ref:
                    break
                tracking[k] = True
            out_metrics.append(StepMetrics(start, times[start], delta, settling, overshoot, sse,
                                           complete=end < n - 1 or settling is not None))
        ok = (settling is not None and settling <= scn.settlingTimeMax + EPS
              and overshoot <= scn.overshoot_max)
        for k in range(start, end + 1):
            objectives[k] = ok and abs(y[k] - r[k]) <= scn.E * ref
            settling_col[k] = math.nan if settling is None else settling

    speed = [min(scn.speed_gain * v, scn.speed_limit) for v in y]
    columns = {
        "r": (NUMERIC, r),
        "y": (NUMERIC, y),
        "y_meas": (NUMERIC, y_meas),
        "u": (NUMERIC, u),
        "mode": (NUMERIC, mode),
        "shaftSpeed": (NUMERIC, speed),
        "settlingTime": (NUMERIC, settling_col),
        "pilotInput": (BOOL, pilot),
        "sensorfaults": (BOOL, sensorfaults),
        "trackingPilotCommands": (BOOL, tracking),
        "controlObjectives": (BOOL, objectives),
    }
    trace = Trace(np.array(times), columns, timestep=dt)
    return SimOutput(trace, out_metrics, injections)
