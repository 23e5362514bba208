"""Session orchestration: lifecycle API, background workers, reports.

A session runs two daemon workers: a collection worker that sweeps all
devices and sleeps a fixed interval between sweeps, and an intensity
worker that refreshes the grid carbon intensity (current value plus a
forecast snapshot) every 900 seconds. The host's epoch_start/epoch_end/
stop calls only move timestamps and swap buckets; they never touch the
network and never let an internal exception escape into the host
program.

With a replay trace and ``replay_epoch_seconds`` set, the session runs
scripted instead: each epoch synchronously consumes the next fixed
window of trace time, which makes two sessions over the same trace
numerically identical regardless of wall-clock scheduling.
"""

from __future__ import annotations

import enum
import logging
import os
import secrets
import signal
import sys
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, TextIO

from .backends.base import Sampler, SamplerConfig, build_backends
from .backends.replay import ReplayBackend
from .devices import DeviceKind
from .energy import DEFAULT_PUE, EpochRecord, close_epoch, total_energy
from .errors import NoMeasurementsError
from .intensity.geo import DEFAULT_GEO_ENDPOINT, resolve_location
from .intensity.http import HttpTransport, NullTransport, Transport
from .intensity.providers import default_intensity
from .intensity.service import (
    DEFAULT_REFRESH_PERIOD,
    IntensityService,
    IntensitySnapshot,
)
from .intensity.types import GeoLocation, step_average
from .predictor import Prediction, predict
from .reporting import (
    FootprintReport,
    compute_shares,
    format_duration,
    render_report,
    to_km_by_car,
)
from .session_log import (
    IntensityRecord,
    SessionLog,
    SessionSummary,
    encode_epoch,
    encode_header,
    encode_intensity,
    encode_prediction,
    encode_summary,
)

logger = logging.getLogger("wattprint.tracker")

DISABLE_ENV = "WATTPRINT_DISABLE"
CONSOLE_PREFIX = "wattprint:"

DEFAULT_SAMPLING_INTERVAL = 10.0  # seconds between device sweeps
DEFAULT_FORECAST_HORIZON = 24 * 3600.0  # how far ahead the worker prefetches


class Phase(enum.Enum):
    CREATED = "created"
    IN_EPOCH = "in_epoch"
    BETWEEN_EPOCHS = "between_epochs"
    STOPPED = "stopped"


@dataclass
class TrackerConfig:
    """Everything a session needs to know up front.

    ``monitor_epochs`` caps measurement: after that many epochs the
    workers shut down and extrapolation covers the remainder, so long
    runs pay zero steady-state overhead. None means monitor everything.
    """

    total_epochs: int | None = None
    epochs_before_pred: int = 1
    monitor_epochs: int | None = None
    sampling_interval: float = DEFAULT_SAMPLING_INTERVAL
    pue: float = DEFAULT_PUE
    log_dir: str | Path | None = None
    experiment: str = "default"
    region: str | None = None
    components: tuple[str, ...] = ("gpu", "cpu_package", "dram")
    replay_trace: str | Path | None = None
    replay_epoch_seconds: float | None = None
    powercap_root: str | Path = Path("/sys/class/powercap")
    intensity_refresh: float = DEFAULT_REFRESH_PERIOD
    forecast_horizon: float = DEFAULT_FORECAST_HORIZON
    exclude_first_epoch: bool = False
    emission_budget_g: float | None = None
    install_signal_handlers: bool = True
    no_net: bool = False
    http_timeout: float = 10.0
    http_retries: int = 2
    endpoints: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.epochs_before_pred < 1:
            raise ValueError("epochs_before_pred must be >= 1")
        if self.monitor_epochs is not None and self.epochs_before_pred > self.monitor_epochs:
            raise ValueError("epochs_before_pred must be <= monitor_epochs")
        if self.total_epochs is not None:
            if self.total_epochs < 1:
                raise ValueError("total_epochs must be >= 1")
            effective_monitor = (
                self.monitor_epochs if self.monitor_epochs is not None else self.total_epochs
            )
            if not self.epochs_before_pred <= effective_monitor <= self.total_epochs:
                raise ValueError(
                    "need 1 <= epochs_before_pred <= monitor_epochs <= total_epochs"
                )
        if self.sampling_interval <= 0:
            raise ValueError("sampling_interval must be positive")
        if self.pue < 1.0:
            raise ValueError("pue must be >= 1.0")
        if self.replay_epoch_seconds is not None:
            if self.replay_epoch_seconds <= 0:
                raise ValueError("replay_epoch_seconds must be positive")
            if self.replay_trace is None:
                raise ValueError("replay_epoch_seconds requires a replay trace")

    def snapshot(self) -> dict:
        """JSON-safe copy for the log header."""
        raw = asdict(self)
        raw["log_dir"] = str(self.log_dir) if self.log_dir is not None else None
        raw["replay_trace"] = str(self.replay_trace) if self.replay_trace else None
        raw["powercap_root"] = str(self.powercap_root)
        raw["components"] = list(self.components)
        return raw


# Default console target: resolve sys.stdout at write time, not import
# time, so redirection (and test capture) works.
USE_CURRENT_STDOUT = object()


class _Console:
    """Writes status lines and report blocks to stdout and the human log."""

    def __init__(self, out):
        self._out = out
        self._fh: TextIO | None = None
        self.lines: list[str] = []

    def attach_file(self, fh: TextIO) -> None:
        self._fh = fh

    def _emit(self, text: str) -> None:
        self.lines.append(text)
        target = sys.stdout if self._out is USE_CURRENT_STDOUT else self._out
        if target is not None:
            print(text, file=target)
        if self._fh is not None:
            try:
                self._fh.write(text + "\n")
            except OSError:  # human log is best-effort
                self._fh = None

    def status(self, text: str) -> None:
        self._emit(f"{CONSOLE_PREFIX} {text}" if text else f"{CONSOLE_PREFIX} ")

    def block(self, text: str) -> None:
        self.status("")
        for line in text.split("\n"):
            self._emit(line)

    @property
    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


class _CollectionWorker(threading.Thread):
    """Sweep every device, then sleep for the sampling interval.

    The loop is deliberately independent of epoch boundaries: the host's
    epoch calls never wake this thread, so tracking costs the training
    loop nothing beyond the bucket bookkeeping in epoch_start/epoch_end.
    Epochs shorter than the interval are covered by the carry-forward
    rule in close_epoch.
    """

    def __init__(self, tracker: "Tracker"):
        super().__init__(name="wattprint-collect", daemon=True)
        self._tracker = tracker

    def run(self) -> None:
        t = self._tracker
        while not t._stop_event.is_set():
            try:
                t._sweep()
            except Exception:
                logger.exception("device sweep failed")
            t._wake.wait(t.config.sampling_interval)
            t._wake.clear()


class _IntensityWorker(threading.Thread):
    """Refresh the intensity snapshot on a fixed cadence.

    The session's first fetch happens synchronously at construction, so
    the worker waits one period before its first refresh.
    """

    def __init__(self, tracker: "Tracker", waiter: Callable[[threading.Event, float], bool]):
        super().__init__(name="wattprint-intensity", daemon=True)
        self._tracker = tracker
        self._waiter = waiter

    def run(self) -> None:
        t = self._tracker
        while not self._waiter(t._stop_event, t.config.intensity_refresh):
            try:
                t._refresh_intensity()
            except Exception:
                logger.exception("intensity refresh failed")


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


_KIND_HEADINGS = ((DeviceKind.GPU, "GPU"), (DeviceKind.CPU_PACKAGE, "CPU"), (DeviceKind.DRAM, "DRAM"))


class Tracker:
    """One tracked session.

    Use ``start_session`` (or the CLI) rather than constructing this
    directly unless you are injecting test doubles. The handle must be
    driven from one thread at a time; the lifecycle methods never raise.
    """

    def __init__(
        self,
        config: TrackerConfig,
        sampler: Sampler | None = None,
        intensity_service: IntensityService | None = None,
        transport: Transport | None = None,
        out=USE_CURRENT_STDOUT,
        clock: Callable[[], float] = time.monotonic,
        wall_clock: Callable[[], datetime] = _utc_now,
        intensity_waiter: Callable[[threading.Event, float], bool] | None = None,
    ):
        config.validate()
        self.config = config
        self._clock = clock
        self._wall = wall_clock
        self._console = _Console(out)
        self._lock = threading.RLock()
        self._stop_event = threading.Event()
        self._wake = threading.Event()

        self._phase = Phase.CREATED
        self._records: list[EpochRecord] = []
        self._epoch_count = 0
        self._bucket: dict[str, list] = {}
        self._epoch_start_clock: float | None = None
        self._measure_mono: tuple[float | None, float | None] = (None, None)

        self._snapshot: IntensitySnapshot | None = None
        self._intensity_points: list[tuple[float, float]] = []
        self._prediction: Prediction | None = None
        self._totals: dict | None = None
        self._finished = False
        self._stopped = False
        self._log_paths: tuple[Path, Path] | None = None
        self._machine_fh: TextIO | None = None
        self._old_handlers: dict = {}

        self.session_id = (
            self._wall().strftime("%Y%m%dT%H%M%SZ") + "-" + secrets.token_hex(3)
        )

        disabled_by_env = os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false")
        if disabled_by_env:
            self._off = True
            self._console.status("tracking disabled by environment variable; doing nothing")
            self.location = GeoLocation("unknown")
            self._sampler = None
            self._service = None
            self._log = self._new_log()
            return
        self._off = False

        if sampler is None:
            sampler = Sampler(
                build_backends(
                    SamplerConfig(
                        components=config.components,
                        replay_trace=config.replay_trace,
                        powercap_root=config.powercap_root,
                    )
                )
            )
        self._sampler = sampler

        if transport is None:
            if config.no_net:
                transport = NullTransport()
            else:
                transport = HttpTransport(
                    timeout=config.http_timeout, retries=config.http_retries
                )

        self.location = resolve_location(
            override=config.region,
            transport=transport,
            endpoint=config.endpoints.get("geo", DEFAULT_GEO_ENDPOINT),
        )

        if intensity_service is None:
            intensity_service = IntensityService(
                self.location,
                transport=transport,
                endpoints=config.endpoints,
                refresh_period=config.intensity_refresh,
                wall_clock=wall_clock,
            )
        self._service = intensity_service

        self._replay = next(
            (b for b in self._sampler.backends if isinstance(b, ReplayBackend)), None
        )
        self._scripted = (
            config.replay_epoch_seconds is not None and self._replay is not None
        )
        if self._scripted:
            self._window_start = self._replay.trace.start

        self._log = self._new_log()
        self._reporting_disabled = not self._sampler.devices
        self._open_logs()

        if self._reporting_disabled:
            self._console.status(
                "no measurable devices were found; energy reporting is disabled"
            )
            return

        self._console.status(self._components_line())
        self._install_signals()

        try:
            # One synchronous fetch so the first prediction always has a
            # snapshot; fetch_current/fetch_forecast never raise, so this
            # stalls at worst for the transport timeout.
            self._refresh_intensity()
        except Exception:
            logger.exception("initial intensity fetch failed")

        self._intensity_worker = _IntensityWorker(
            self, intensity_waiter or (lambda event, timeout: event.wait(timeout))
        )
        self._intensity_worker.start()
        self._collection_worker = None
        if not self._scripted:
            self._collection_worker = _CollectionWorker(self)
            self._collection_worker.start()

    # -- construction helpers -------------------------------------------------

    def _new_log(self) -> SessionLog:
        return SessionLog(
            session_id=self.session_id,
            started_at=self._wall().isoformat(),
            experiment=self.config.experiment,
            devices=[
                {"id": d.id, "kind": d.kind.value, "label": d.label, "backend": d.backend}
                for d in (self._sampler.devices if self._sampler else [])
            ],
            config=self.config.snapshot(),
            location={
                "country_code": self.location.country_code,
                "region_name": self.location.region_name,
                "city": self.location.city,
                "resolved_from": self.location.resolved_from.value,
            },
        )

    def _open_logs(self) -> None:
        if self.config.log_dir is None:
            return
        base = Path(self.config.log_dir) / self.config.experiment
        try:
            base.mkdir(parents=True, exist_ok=True)
            machine = base / f"{self.session_id}.jsonl"
            human = base / f"{self.session_id}.log"
            self._machine_fh = machine.open("w", encoding="utf-8", buffering=1)
            self._console.attach_file(human.open("w", encoding="utf-8", buffering=1))
            self._log_paths = (machine, human)
            self._stream(encode_header(self._log))
        except OSError as exc:
            logger.warning("cannot write logs under %s: %s", base, exc)
            self._machine_fh = None
            self._log_paths = None

    def _stream(self, line: str) -> None:
        if self._machine_fh is None:
            return
        try:
            self._machine_fh.write(line + "\n")
        except OSError as exc:
            logger.warning("machine log write failed: %s", exc)
            self._machine_fh = None

    def _components_line(self) -> str:
        groups = []
        for kind, heading in _KIND_HEADINGS:
            labels = [d.label for d in self._sampler.devices if d.kind is kind]
            if labels:
                groups.append(f"{heading} with device(s) {', '.join(labels)}.")
        return "The following components were found: " + " ".join(groups)

    def _install_signals(self) -> None:
        if not self.config.install_signal_handlers:
            return
        if threading.current_thread() is not threading.main_thread():
            return
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                self._old_handlers[sig] = signal.getsignal(sig)
                signal.signal(sig, self._on_signal)
            except (ValueError, OSError):  # pragma: no cover - platform dependent
                self._old_handlers.pop(sig, None)

    def _restore_signals(self) -> None:
        for sig, old in self._old_handlers.items():
            try:
                signal.signal(sig, old)
            except (ValueError, OSError):  # pragma: no cover
                pass
        self._old_handlers = {}

    def _on_signal(self, signum, frame) -> None:
        logger.warning("received signal %s; stopping the tracker", signum)
        old = self._old_handlers.get(signum, signal.SIG_DFL)
        self.stop()
        if callable(old):
            old(signum, frame)
        elif old == signal.SIG_DFL:
            signal.signal(signum, signal.SIG_DFL)
            os.kill(os.getpid(), signum)

    # -- worker callbacks ------------------------------------------------------

    def _sweep(self) -> None:
        samples = self._sampler.sweep()
        with self._lock:
            if self._phase is not Phase.IN_EPOCH:
                return
            for sample in samples:
                bucket = self._bucket.get(sample.device_id)
                if bucket is not None:
                    bucket.append(sample)

    def _refresh_intensity(self) -> None:
        snapshot = self._service.snapshot(self.config.forecast_horizon)
        mono = self._clock()
        with self._lock:
            self._snapshot = snapshot
            self._intensity_points.append((mono, snapshot.current.value))
            record = IntensityRecord(
                time=snapshot.current.fetched_at.isoformat(),
                monotonic=mono,
                value=snapshot.current.value,
                source=snapshot.current.source.value,
                region=snapshot.current.region,
            )
            self._log.intensity.append(record)
            self._stream(encode_intensity(record))

    # -- public lifecycle ------------------------------------------------------

    @property
    def prediction(self) -> Prediction | None:
        return self._prediction

    @property
    def records(self) -> list[EpochRecord]:
        with self._lock:
            return list(self._records)

    @property
    def session(self) -> SessionLog:
        return self._log

    @property
    def log_paths(self) -> tuple[Path, Path] | None:
        return self._log_paths

    @property
    def reporting_disabled(self) -> bool:
        return self._off or self._reporting_disabled

    def epoch_start(self) -> None:
        """Mark the start of one epoch. Never raises into the host."""
        try:
            with self._lock:
                if self.reporting_disabled or self._stopped:
                    return
                if self._phase not in (Phase.CREATED, Phase.BETWEEN_EPOCHS):
                    logger.error(
                        "epoch_start called in phase %s; ignored", self._phase.value
                    )
                    return
                self._phase = Phase.IN_EPOCH
                self._epoch_start_clock = self._clock()
                if self._measure_mono[0] is None:
                    self._measure_mono = (self._epoch_start_clock, self._measure_mono[1])
                if not self._finished:
                    self._bucket = {d.id: [] for d in self._sampler.live_devices()}
        except Exception:
            logger.exception("epoch_start failed internally; ignored")

    def epoch_end(self) -> None:
        """Close the current epoch; may emit the prediction or the report.

        Never raises into the host.
        """
        try:
            if self._epoch_end_inner():
                self._join_workers()  # measurement just finished; join outside the lock
        except Exception:
            logger.exception("epoch_end failed internally; ignored")

    def _epoch_end_inner(self) -> bool:
        with self._lock:
            if self.reporting_disabled or self._stopped:
                return False
            if self._phase is not Phase.IN_EPOCH:
                logger.error("epoch_end called in phase %s; ignored", self._phase.value)
                return False
            self._phase = Phase.BETWEEN_EPOCHS
            end_clock = self._clock()
            self._measure_mono = (self._measure_mono[0], end_clock)
            index = self._epoch_count
            self._epoch_count += 1
            if self._finished:
                return False
            if self._scripted:
                start, end = self._consume_replay_window()
            else:
                start, end = self._epoch_start_clock, end_clock
            bucket, self._bucket = self._bucket, {}
            previous = self._records[-1] if self._records else None
            try:
                record = close_epoch(bucket, start, end, previous=previous, index=index)
            except (NoMeasurementsError, ValueError) as exc:
                logger.warning("epoch %d not recorded: %s", index, exc)
                return False
            self._records.append(record)
            self._log.epochs.append(record)
            self._stream(encode_epoch(record))

            if (
                self._prediction is None
                and self.config.total_epochs is not None
                and len(self._records) == self.config.epochs_before_pred
            ):
                self._emit_prediction()
            cap = self.config.monitor_epochs
            if cap is None:
                cap = self.config.total_epochs
            if cap is not None and self._epoch_count >= cap:
                self._finish_measurement()
                return True
            return False

    def _consume_replay_window(self) -> tuple[float, float]:
        window = self.config.replay_epoch_seconds
        start = self._window_start
        end = start + window
        for device in self._replay.devices():
            bucket = self._bucket.setdefault(device.id, [])
            while True:
                ts = self._replay.peek_timestamp(device)
                if ts is None or ts >= end:
                    break
                bucket.append(self._replay.read(device))
        self._window_start = end
        return start, end

    def _emit_prediction(self) -> None:
        total = self.config.total_epochs
        snapshot = self._snapshot
        forecast = snapshot.forecast if snapshot is not None else None
        current = snapshot.current if snapshot is not None else default_intensity(self._wall())
        prediction = predict(
            self._records,
            total,
            self.config.pue,
            forecast=forecast,
            current=current,
            now=self._wall().timestamp(),
            exclude_first=self.config.exclude_first_epoch,
        )
        self._prediction = prediction
        self._log.prediction = prediction
        self._stream(encode_prediction(prediction))
        self._console.status(
            f"Carbon intensity for the next {format_duration(prediction.predicted_duration)} "
            f"is predicted to be {prediction.predicted_intensity:.2f} gCO2/kWh"
            + self._location_suffix()
        )
        report = FootprintReport(
            epochs=total,
            duration_s=prediction.predicted_duration,
            energy_kwh=prediction.predicted_energy,
            emissions_g=prediction.predicted_emissions,
            km_by_car=to_km_by_car(prediction.predicted_emissions),
            intensity_gkwh=prediction.predicted_intensity,
            location=self.location.display,
        )
        self._console.block(render_report(report, "predicted"))
        budget = self.config.emission_budget_g
        if budget is not None and prediction.predicted_emissions > budget:
            self._console.status(
                f"WARNING: predicted emissions {prediction.predicted_emissions:.3f} g "
                f"exceed the budget of {budget:.3f} g"
            )

    def _location_suffix(self) -> str:
        display = self.location.display
        if self.location.country_code == "unknown" and not display:
            return " at an unknown location."
        return f" at detected location: {display}."

    def _signal_stop(self) -> None:
        self._stop_event.set()
        self._wake.set()

    def _join_workers(self) -> None:
        # Never call while holding self._lock: the workers take it too.
        for worker in (getattr(self, "_collection_worker", None),
                       getattr(self, "_intensity_worker", None)):
            if worker is not None and worker.is_alive():
                worker.join(timeout=10.0)

    def _finish_measurement(self) -> None:
        if self._finished:
            return
        self._finished = True
        self._signal_stop()
        if not self._records:
            self._console.status("no epochs were measured; nothing to report")
            return
        duration = sum(r.duration for r in self._records)
        energy_kwh = total_energy(self._records, self.config.pue)
        points = self._intensity_points
        mono_start, mono_end = self._measure_mono
        if points:
            avg_intensity = step_average(points, mono_start, mono_end)
            source = "measured"
        else:
            fallback = default_intensity(self._wall())
            avg_intensity = fallback.value
            source = fallback.source.value
            logger.warning("no intensity samples were recorded; using the default average")
        emissions = energy_kwh * avg_intensity
        device_energy: dict[str, float] = {}
        for record in self._records:
            for dev_id, joules in record.energy.items():
                device_energy[dev_id] = device_energy.get(dev_id, 0.0) + joules
        self._totals = {
            "duration_s": duration,
            "energy_kwh": energy_kwh,
            "emissions_g": emissions,
            "km_by_car": to_km_by_car(emissions),
            "avg_intensity_gkwh": avg_intensity,
            "intensity_source": source,
            "device_energy_j": device_energy,
        }
        self._console.status(
            f"Average carbon intensity during training was {avg_intensity:.2f} gCO2/kWh"
            + self._location_suffix()
        )
        report = FootprintReport(
            epochs=len(self._records),
            duration_s=duration,
            energy_kwh=energy_kwh,
            emissions_g=emissions,
            km_by_car=self._totals["km_by_car"],
            intensity_gkwh=avg_intensity,
            intensity_source=source,
            location=self.location.display,
            device_energy_j=device_energy,
            component_shares=compute_shares(device_energy),
        )
        self._console.block(render_report(report, "actual"))

    def stop(self) -> None:
        """Flush reports and logs and release every resource. Idempotent.

        A partial epoch (stop inside epoch_start/epoch_end) is discarded
        with a warning. Never raises into the host.
        """
        try:
            with self._lock:
                if self._stopped:
                    return
                self._stopped = True
                if self._off:
                    self._phase = Phase.STOPPED
                    return
                if self._phase is Phase.IN_EPOCH:
                    logger.warning("stopped mid-epoch; the partial epoch is discarded")
                self._phase = Phase.STOPPED
                if not self._reporting_disabled:
                    self._finish_measurement()
                    if self._totals is not None:
                        summary = SessionSummary(
                            measured_epochs=len(self._records),
                            total_epochs=self.config.total_epochs,
                            duration_s=self._totals["duration_s"],
                            energy_kwh=self._totals["energy_kwh"],
                            emissions_g=self._totals["emissions_g"],
                            km_by_car=self._totals["km_by_car"],
                            avg_intensity_gkwh=self._totals["avg_intensity_gkwh"],
                            pue=self.config.pue,
                            early_stop=(
                                self.config.total_epochs is not None
                                and self._epoch_count < self.config.total_epochs
                            ),
                        )
                        self._log.summary = summary
                        self._stream(encode_summary(summary))
                    self._console.status("Finished monitoring.")
            self._signal_stop()
            self._join_workers()
            if self._sampler is not None:
                self._sampler.close()
            self._restore_signals()
            with self._lock:
                self._log.console = self._console.text
                if self._machine_fh is not None:
                    try:
                        self._machine_fh.close()
                    except OSError:  # pragma: no cover
                        pass
                    self._machine_fh = None
        except Exception:
            logger.exception("stop failed internally; resources released best-effort")


def start_session(config: TrackerConfig, **injected) -> Tracker:
    """Start a tracked session: enumerate devices, resolve the location,
    and launch the background workers.

    Keyword arguments pass test doubles straight to the Tracker
    constructor (sampler, intensity_service, transport, out, clocks).
    """
    return Tracker(config, **injected)
