"""Replay trace parsing and backend determinism."""

import pytest

from wattprint.backends import ReplayBackend, SamplerConfig, enumerate_devices, parse_trace
from wattprint.backends.base import Sampler, build_backends
from wattprint.devices import DeviceKind
from wattprint.errors import TraceError

from conftest import constant_trace, write_trace

TWO_DEVICE_TRACE = """\
# fixture with a gpu and a cpu package
devices: gpu0=gpu cpu0=cpu_package
0.0 gpu0 250.0
0.0 cpu0 80.0
10.0 gpu0 250.0
10.0 cpu0 82.0
20.0 gpu0 251.0
20.0 cpu0 81.0
"""


def test_header_declares_devices(tmp_path):
    path = tmp_path / "two.trace"
    path.write_text(TWO_DEVICE_TRACE)
    trace = parse_trace(path)
    assert [d.id for d in trace.devices] == ["gpu0", "cpu0"]
    assert {d.kind for d in trace.devices} == {DeviceKind.GPU, DeviceKind.CPU_PACKAGE}
    assert trace.start == 0.0 and trace.end == 20.0


def test_enumerate_devices_echoes_trace_header(tmp_path):
    path = tmp_path / "two.trace"
    path.write_text(TWO_DEVICE_TRACE)
    devices = enumerate_devices(SamplerConfig(components=(), replay_trace=path))
    assert len(devices) == 2
    assert {d.kind for d in devices} == {DeviceKind.GPU, DeviceKind.CPU_PACKAGE}


def test_all_backends_disabled_yields_no_devices(tmp_path):
    config = SamplerConfig(components=(), replay_trace=None,
                           powercap_root=tmp_path / "missing")
    assert enumerate_devices(config) == []


def test_read_echoes_trace_rows(tmp_path):
    path = tmp_path / "two.trace"
    path.write_text(TWO_DEVICE_TRACE)
    backend = ReplayBackend(path)
    gpu = backend.devices()[0]
    first = backend.read(gpu)
    second = backend.read(gpu)
    assert (first.timestamp, first.power) == (0.0, 250.0)
    assert (second.timestamp, second.power) == (10.0, 250.0)


def test_idle_fixture_value(tmp_path):
    path = constant_trace(tmp_path / "idle.trace", watts=15.0, steps=3)
    backend = ReplayBackend(path)
    sample = backend.read(backend.devices()[0])
    assert sample.power == 15.0


def test_replay_is_deterministic(tmp_path):
    path = tmp_path / "two.trace"
    path.write_text(TWO_DEVICE_TRACE)

    def run():
        backend = ReplayBackend(path)
        out = []
        for _ in range(5):
            for device in backend.devices():
                s = backend.read(device)
                out.append((s.device_id, s.timestamp, s.power))
        return out

    assert run() == run()


def test_exhausted_trace_repeats_last_value(tmp_path):
    path = constant_trace(tmp_path / "short.trace", watts=100.0, steps=2, dt=5.0)
    backend = ReplayBackend(path)
    device = backend.devices()[0]
    samples = [backend.read(device) for _ in range(4)]
    assert [s.power for s in samples] == [100.0] * 4
    timestamps = [s.timestamp for s in samples]
    assert timestamps == sorted(timestamps)
    assert len(set(timestamps)) == 4  # strictly increasing past the end
    assert backend.peek_timestamp(device) is None


def test_peek_reports_next_row_time(tmp_path):
    path = constant_trace(tmp_path / "t.trace", watts=10.0, steps=3, dt=2.0)
    backend = ReplayBackend(path)
    device = backend.devices()[0]
    assert backend.peek_timestamp(device) == 0.0
    backend.read(device)
    assert backend.peek_timestamp(device) == 2.0


@pytest.mark.parametrize(
    "text, message",
    [
        ("0.0 gpu0 1.0\n", "header"),
        ("devices: gpu0=warp\n0.0 gpu0 1.0\n", "kind"),
        ("devices: gpu0=gpu\n0.0 gpu1 1.0\n", "undeclared"),
        ("devices: gpu0=gpu\n0.0 gpu0 -5\n", "negative"),
        ("devices: gpu0=gpu\n1.0 gpu0 5\n1.0 gpu0 6\n", "strictly increase"),
        ("devices: gpu0=gpu\nxyz gpu0 5\n", "non-numeric"),
        ("devices: gpu0=gpu\n", "no rows"),
        ("", "empty"),
    ],
)
def test_malformed_traces_rejected(text, message):
    with pytest.raises(TraceError, match=message):
        parse_trace(text if "\n" in text else text + "\n")


def test_sampler_serializes_reads_across_backends(tmp_path):
    path = tmp_path / "two.trace"
    path.write_text(TWO_DEVICE_TRACE)
    sampler = Sampler(build_backends(SamplerConfig(components=(), replay_trace=path)))
    sweep = sampler.sweep()
    assert {s.device_id for s in sweep} == {"gpu0", "cpu0"}
    assert all(s.power is not None and s.power >= 0 for s in sweep)
