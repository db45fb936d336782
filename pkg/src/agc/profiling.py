"""Wall-clock and peak resident memory per pipeline phase.

Peak memory is the process resident set size, sampled at phase boundaries
and by a background poll every 100 ms.
"""

from __future__ import annotations

import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

try:
    import psutil

    _PROC = psutil.Process()
except Exception:  # pragma: no cover - platform dependent
    _PROC = None

POLL_SECONDS = 0.1


def current_rss() -> int:
    """Resident set size in bytes, or 0 when the OS facility is unavailable."""
    if _PROC is None:
        return 0
    try:
        return int(_PROC.memory_info().rss)
    except Exception:  # pragma: no cover
        return 0


@dataclass
class RunProfile:
    wall_seconds: float = 0.0
    peak_mem_bytes: int = 0
    phase_breakdown: dict = field(default_factory=dict)
    mem_unavailable: bool = False
    mem_shared: bool = False

    def to_dict(self) -> dict:
        return {
            "wall_seconds": self.wall_seconds,
            "peak_mem_bytes": self.peak_mem_bytes,
            "phase_breakdown": dict(self.phase_breakdown),
            "mem_unavailable": self.mem_unavailable,
            "mem_shared": self.mem_shared,
        }


class _MemoryPoll:
    def __init__(self):
        self.peak = current_rss()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        while not self._stop.wait(POLL_SECONDS):
            self.peak = max(self.peak, current_rss())

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.peak = max(self.peak, current_rss())
        self._stop.set()
        self._thread.join()


@contextmanager
def profile_scope(phase: str):
    """Time one phase and track its peak RSS; yields the profile being filled."""
    frag = RunProfile(mem_unavailable=_PROC is None)
    if frag.mem_unavailable:
        log.warning("process memory facility unavailable; peak_mem_bytes reported as 0")
    start = time.monotonic()
    with _MemoryPoll() as poll:
        try:
            yield frag
        finally:
            frag.wall_seconds = time.monotonic() - start
    frag.peak_mem_bytes = poll.peak
    frag.phase_breakdown[phase] = frag.wall_seconds


class Profiler:
    """Accumulates phases of one run into a single RunProfile."""

    def __init__(self):
        self.profile = RunProfile(mem_unavailable=_PROC is None)
        self._start = time.monotonic()

    @contextmanager
    def phase(self, name: str):
        with profile_scope(name) as frag:
            yield frag
        prof = self.profile
        prof.phase_breakdown[name] = prof.phase_breakdown.get(name, 0.0) + frag.wall_seconds
        prof.peak_mem_bytes = max(prof.peak_mem_bytes, frag.peak_mem_bytes)

    def finish(self) -> RunProfile:
        self.profile.wall_seconds = time.monotonic() - self._start
        return self.profile
