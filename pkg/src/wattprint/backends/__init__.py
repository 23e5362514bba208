from .base import PowerBackend, Sampler, SamplerConfig, build_backends, enumerate_devices
from .gpu import GpuBackend
from .powercap import PowercapBackend
from .replay import ReplayBackend, ReplayTrace, parse_trace

__all__ = [
    "PowerBackend",
    "Sampler",
    "SamplerConfig",
    "build_backends",
    "enumerate_devices",
    "GpuBackend",
    "PowercapBackend",
    "ReplayBackend",
    "ReplayTrace",
    "parse_trace",
]
