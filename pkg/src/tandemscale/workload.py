"""Unit-job arrival traces for the tandem network.

File format is JSON lines: a header ``{"K": int, ...}`` followed by one
``{"t": float}`` per job, nondecreasing in ``t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np


class TraceFormatError(ValueError):
    """Raised while parsing a malformed trace file."""


@dataclass(frozen=True)
class Trace:
    """Sorted arrival times of unit-size jobs for ``servers`` tandem servers."""

    arrivals: tuple = field(default_factory=tuple)
    servers: int = 1

    def __post_init__(self):
        arr = tuple(float(t) for t in self.arrivals)
        object.__setattr__(self, "arrivals", arr)
        if int(self.servers) != self.servers or self.servers < 1:
            raise ValueError(f"server count must be a positive integer, got {self.servers}")
        object.__setattr__(self, "servers", int(self.servers))
        for i in range(1, len(arr)):
            if arr[i] < arr[i - 1]:
                raise ValueError(f"arrivals unsorted at index {i}: {arr[i - 1]} > {arr[i]}")
        if arr and arr[0] < 0:
            raise ValueError("arrival times must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.arrivals)

    @property
    def K(self) -> int:
        return self.servers

    def __len__(self):
        return len(self.arrivals)


def gen_batch(n: int, t0: float = 0.0, K: int = 1) -> Trace:
    """``n`` jobs released together at ``t0``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return Trace((float(t0),) * n, K)


def gen_trickle_then_burst(gap: float, burst: int, K: int = 2) -> Trace:
    """One job at 0, one at ``gap``, then ``burst`` jobs just after ``gap``.

    The burst lands at ``gap * (1 + 1e-6)``, after the second job has begun
    service but before it can finish.
    """
    if not gap > 0:
        raise ValueError("gap must be positive")
    if burst < 0:
        raise ValueError("burst must be nonnegative")
    eps = gap * 1e-6
    return Trace((0.0, float(gap)) + (gap + eps,) * burst, K)


def gen_poisson(rate: float, horizon: float, seed: int, K: int = 1) -> Trace:
    """Poisson arrivals on ``[0, horizon)``; deterministic in ``seed``."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = np.random.default_rng(seed)
    times = []
    t = rng.exponential(1.0 / rate)
    while t < horizon:
        times.append(float(t))
        t += rng.exponential(1.0 / rate)
    return Trace(tuple(times), K)


# ----------------------------------------------------------------------
# JSON-lines I/O
# ----------------------------------------------------------------------
def dumps(trace: Trace, meta: Optional[dict] = None) -> str:
    """Serialise ``trace``; ``meta`` entries are added to the header line."""
    header = {"K": trace.servers}
    if meta:
        header.update({k: v for k, v in meta.items() if k != "K"})
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps({"t": t}) for t in trace.arrivals)
    return "\n".join(lines) + "\n"


def loads(text: str) -> Trace:
    lines = text.splitlines()
    header = None
    arrivals: list[float] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise TraceFormatError(f"line {lineno}: expected an object")
        if header is None:
            if "K" not in obj:
                raise TraceFormatError(f"line {lineno}: missing K header")
            K = obj["K"]
            if not isinstance(K, int) or isinstance(K, bool) or K < 1:
                raise TraceFormatError(f"line {lineno}: K must be a positive integer")
            header = K
            continue
        if set(obj) != {"t"}:
            raise TraceFormatError(f"line {lineno}: expected exactly one field 't'")
        t = obj["t"]
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not np.isfinite(t) or t < 0:
            raise TraceFormatError(f"line {lineno}: arrival time must be a finite nonnegative number")
        if arrivals and t < arrivals[-1]:
            raise TraceFormatError(f"line {lineno}: unsorted arrival {t} < {arrivals[-1]}")
        arrivals.append(float(t))
    if header is None:
        raise TraceFormatError("line 1: missing K header")
    return Trace(tuple(arrivals), header)


def emit(trace: Trace, path: Union[str, Path], meta: Optional[dict] = None) -> None:
    Path(path).write_text(dumps(trace, meta))


def parse(path: Union[str, Path]) -> Trace:
    return loads(Path(path).read_text())
