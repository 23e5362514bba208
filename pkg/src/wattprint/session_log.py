"""Durable session logs: line-oriented machine log, parser, aggregator.

Each session writes two files: ``<session_id>.jsonl`` (one JSON object
per line: header, then epoch/intensity lines as they happen, then the
prediction and summary) and ``<session_id>.log`` (the console output).
One line per event keeps a crashed session's log parseable up to the
last completed write. The machine log is self-contained: the stored
totals can be recomputed from the epoch lines and the PUE.

Schema version 1 line types (unknown fields and types are ignored):

    header     session_id, started_at, experiment, version, devices,
               config, location
    epoch      index, start, end, duration, avg_power, energy, carried
    intensity  time (ISO wall clock), monotonic, value, source, region
    prediction total_epochs, monitored_epochs, predicted_duration,
               predicted_energy, predicted_intensity, predicted_emissions
    summary    measured_epochs, total_epochs, duration_s, energy_kwh,
               emissions_g, km_by_car, avg_intensity_gkwh, pue, early_stop
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .energy import DEFAULT_PUE, EpochRecord, total_energy
from .errors import LogParseError
from .intensity.providers import load_default_average
from .intensity.types import step_average
from .predictor import Prediction
from .reporting import ConversionFactors, to_km_by_car

logger = logging.getLogger("wattprint.session_log")

LOG_VERSION = 1


@dataclass(frozen=True, slots=True)
class IntensityRecord:
    time: str  # wall-clock ISO 8601
    monotonic: float
    value: float
    source: str
    region: str


@dataclass(frozen=True, slots=True)
class SessionSummary:
    measured_epochs: int
    duration_s: float
    energy_kwh: float
    emissions_g: float
    km_by_car: float
    avg_intensity_gkwh: float
    pue: float
    early_stop: bool
    total_epochs: int | None = None


@dataclass
class SessionLog:
    """Typed view of one tracked session, as logged or as parsed."""

    session_id: str
    started_at: str
    experiment: str = "default"
    version: int = LOG_VERSION
    devices: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    location: dict | None = None
    epochs: list[EpochRecord] = field(default_factory=list)
    intensity: list[IntensityRecord] = field(default_factory=list)
    prediction: Prediction | None = None
    summary: SessionSummary | None = None
    console: str = ""  # human-log mirror, not part of the machine log

    @property
    def pue(self) -> float:
        if self.summary is not None:
            return self.summary.pue
        return float(self.config.get("pue", DEFAULT_PUE))


def encode_header(session: SessionLog) -> str:
    return json.dumps(
        {
            "type": "header",
            "version": session.version,
            "session_id": session.session_id,
            "started_at": session.started_at,
            "experiment": session.experiment,
            "devices": session.devices,
            "config": session.config,
            "location": session.location,
        }
    )


def encode_epoch(epoch: EpochRecord) -> str:
    return json.dumps(
        {
            "type": "epoch",
            "index": epoch.index,
            "start": epoch.start,
            "end": epoch.end,
            "duration": epoch.duration,
            "avg_power": dict(epoch.avg_power),
            "energy": dict(epoch.energy),
            "carried": sorted(epoch.carried),
        }
    )


def encode_intensity(record: IntensityRecord) -> str:
    return json.dumps(
        {
            "type": "intensity",
            "time": record.time,
            "monotonic": record.monotonic,
            "value": record.value,
            "source": record.source,
            "region": record.region,
        }
    )


def encode_prediction(p: Prediction) -> str:
    return json.dumps(
        {
            "type": "prediction",
            "total_epochs": p.total_epochs,
            "monitored_epochs": p.monitored_epochs,
            "predicted_duration": p.predicted_duration,
            "predicted_energy": p.predicted_energy,
            "predicted_intensity": p.predicted_intensity,
            "predicted_emissions": p.predicted_emissions,
        }
    )


def encode_summary(s: SessionSummary) -> str:
    return json.dumps(
        {
            "type": "summary",
            "measured_epochs": s.measured_epochs,
            "total_epochs": s.total_epochs,
            "duration_s": s.duration_s,
            "energy_kwh": s.energy_kwh,
            "emissions_g": s.emissions_g,
            "km_by_car": s.km_by_car,
            "avg_intensity_gkwh": s.avg_intensity_gkwh,
            "pue": s.pue,
            "early_stop": s.early_stop,
        }
    )


def _machine_lines(session: SessionLog) -> Iterable[str]:
    yield encode_header(session)
    for epoch in session.epochs:
        yield encode_epoch(epoch)
    for record in session.intensity:
        yield encode_intensity(record)
    if session.prediction is not None:
        yield encode_prediction(session.prediction)
    if session.summary is not None:
        yield encode_summary(session.summary)


def write_log(session: SessionLog, directory: str | Path) -> tuple[Path, Path] | None:
    """Write the machine and human logs under ``directory/experiment``.

    Returns the two paths, or None if the directory is unwritable (a
    warning is logged and reporting continues on standard output only).
    """
    base = Path(directory) / session.experiment
    try:
        base.mkdir(parents=True, exist_ok=True)
        machine = base / f"{session.session_id}.jsonl"
        with machine.open("w", encoding="utf-8") as fh:
            for line in _machine_lines(session):
                fh.write(line + "\n")
        human = base / f"{session.session_id}.log"
        human.write_text(session.console, encoding="utf-8")
    except OSError as exc:
        logger.warning("could not write session logs under %s: %s", base, exc)
        return None
    return machine, human


def _parse_epoch(obj: dict) -> EpochRecord:
    return EpochRecord(
        index=int(obj["index"]),
        start=float(obj["start"]),
        end=float(obj["end"]),
        duration=float(obj["duration"]),
        avg_power={str(k): float(v) for k, v in obj["avg_power"].items()},
        energy={str(k): float(v) for k, v in obj["energy"].items()},
        carried=frozenset(obj.get("carried", [])),
    )


def parse_log(path: str | Path) -> SessionLog:
    """Parse a machine log back into a typed session.

    Unknown fields and unknown line types are ignored so newer logs stay
    readable. A malformed or truncated line fails hard, naming the line.

    Raises:
        LogParseError: unreadable file, malformed line, or no header.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LogParseError(path, 0, f"cannot read: {exc}") from exc

    session: SessionLog | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(path, line_no, f"malformed JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise LogParseError(path, line_no, "expected a JSON object")
        kind = obj.get("type")
        try:
            if kind == "header":
                session = SessionLog(
                    session_id=str(obj["session_id"]),
                    started_at=str(obj["started_at"]),
                    experiment=str(obj.get("experiment", "default")),
                    version=int(obj.get("version", LOG_VERSION)),
                    devices=list(obj.get("devices", [])),
                    config=dict(obj.get("config", {})),
                    location=obj.get("location"),
                )
            elif session is None:
                raise LogParseError(path, line_no, "first line must be the header")
            elif kind == "epoch":
                session.epochs.append(_parse_epoch(obj))
            elif kind == "intensity":
                session.intensity.append(
                    IntensityRecord(
                        time=str(obj["time"]),
                        monotonic=float(obj.get("monotonic", 0.0)),
                        value=float(obj["value"]),
                        source=str(obj["source"]),
                        region=str(obj.get("region", "")),
                    )
                )
            elif kind == "prediction":
                session.prediction = Prediction(
                    total_epochs=int(obj["total_epochs"]),
                    monitored_epochs=int(obj["monitored_epochs"]),
                    predicted_duration=float(obj["predicted_duration"]),
                    predicted_energy=float(obj["predicted_energy"]),
                    predicted_intensity=float(obj["predicted_intensity"]),
                    predicted_emissions=float(obj["predicted_emissions"]),
                )
            elif kind == "summary":
                total = obj.get("total_epochs")
                session.summary = SessionSummary(
                    measured_epochs=int(obj["measured_epochs"]),
                    total_epochs=int(total) if total is not None else None,
                    duration_s=float(obj["duration_s"]),
                    energy_kwh=float(obj["energy_kwh"]),
                    emissions_g=float(obj["emissions_g"]),
                    km_by_car=float(obj["km_by_car"]),
                    avg_intensity_gkwh=float(obj["avg_intensity_gkwh"]),
                    pue=float(obj["pue"]),
                    early_stop=bool(obj["early_stop"]),
                )
            # other types: ignored for forward compatibility
        except LogParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(path, line_no, f"bad {kind or 'unknown'} line: {exc}") from exc

    if session is None:
        raise LogParseError(path, 0, "no header line found")
    return session


def recompute_energy_kwh(session: SessionLog) -> float:
    """Total energy recomputed from the raw epoch records and the PUE."""
    return total_energy(session.epochs, session.pue)


def realized_intensity(session: SessionLog) -> float:
    """Time-weighted average of the intensity samples a session recorded.

    Weighted over the samples' own span (epoch clocks are not comparable
    to the sample clock in every mode). Falls back to the shipped
    default average when the session recorded no samples at all.
    """
    if not session.intensity:
        value, _, _ = load_default_average()
        return value
    points = sorted((r.monotonic, r.value) for r in session.intensity)
    return step_average(points, points[0][0], points[-1][0])


@dataclass(frozen=True, slots=True)
class AggregateTotals:
    sessions: int
    energy_kwh: float
    emissions_g: float
    km_by_car: float


def aggregate(
    logs: Sequence[SessionLog], factors: ConversionFactors | None = None
) -> AggregateTotals:
    """Total footprint across sessions.

    Energy is summed; emissions are summed using each session's own
    realized intensity (the stored totals, or a recomputation for
    sessions that died before writing a summary).

    Raises:
        ValueError: no logs.
    """
    if not logs:
        raise ValueError("no session logs to aggregate")
    energy = 0.0
    emissions = 0.0
    for session in logs:
        if session.summary is not None:
            energy += session.summary.energy_kwh
            emissions += session.summary.emissions_g
        elif session.epochs:
            kwh = recompute_energy_kwh(session)
            energy += kwh
            emissions += kwh * realized_intensity(session)
        else:
            logger.warning("session %s has no epochs; skipped", session.session_id)
    return AggregateTotals(
        sessions=len(logs),
        energy_kwh=energy,
        emissions_g=emissions,
        km_by_car=to_km_by_car(emissions, factors),
    )


def find_logs(root: str | Path) -> list[Path]:
    """All machine logs under ``root``, one experiment per subdirectory."""
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(root.rglob("*.jsonl"))
