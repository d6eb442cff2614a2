from .base import (
    BackendDescriptor,
    ComputeBackend,
    ComputeJob,
    JobHandle,
    JobState,
    JobStatus,
    select_backend,
)
from .engine import ContainerEngineBackend
from .local import LocalProcessBackend
from .registry import BackendRegistry, build_backend, load_backends_file

__all__ = [
    "BackendDescriptor",
    "BackendRegistry",
    "ComputeBackend",
    "ComputeJob",
    "ContainerEngineBackend",
    "JobHandle",
    "JobState",
    "JobStatus",
    "LocalProcessBackend",
    "build_backend",
    "load_backends_file",
    "select_backend",
]
