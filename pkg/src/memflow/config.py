"""Run configuration: flat ``key = value`` files plus overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from memflow.errors import CapError, KernelParseError, MemflowError
from memflow.kernel import MemoryKernel, parse_terms


class ConfigError(MemflowError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class RunConfig:
    kernel: str = "2*t^0*exp(-0.5)"
    T: float = 2.0
    n: int = 2000
    J: int = 128
    K: int = 12
    eps: float = 1e-13
    N: int = 3
    L: float = math.pi
    jmax: int = 400
    s: float = 0.0
    alpha: float = 4.0
    t: tuple[float, ...] = (0.25, 1.0, 2.0)
    eta: tuple[float, ...] = (1.0, 4.0, 25.0, 100.0)
    out: str = "memflow_out"

    def __post_init__(self):
        if self.N < 2:
            raise CapError("N must be at least 2")
        if self.N > self.K:
            raise CapError(f"N={self.N} exceeds derivative cap K={self.K}")
        if self.T <= 0 or self.n < 1:
            raise MemflowError("need T > 0 and n >= 1")
        if any(t < 0 or t > self.T for t in self.t):
            raise CapError(f"t values must lie in [0, {self.T}]")
        if any(e <= 0 for e in self.eta):
            raise MemflowError("eta values must be positive")
        if not 0 <= self.alpha <= 4:
            raise MemflowError("alpha must lie in [0, 4]")

    @property
    def h(self) -> float:
        return self.T / self.n

    def memory_kernel(self) -> MemoryKernel:
        return MemoryKernel.from_spec(self.kernel)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str, line: int, column: int):
    kind = _TYPES[key]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind.startswith("tuple"):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}", line, column) from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected 'key = value'", lineno, col)
        key_part, raw = body.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno, key_col)
        val_col = len(key_part) + 2 + (len(raw) - len(raw.lstrip()))
        raw = raw.strip()
        if key == "kernel":
            try:
                parse_terms(raw)
            except KernelParseError as exc:
                raise ConfigError(str(exc).split(": ", 1)[1], lineno, val_col + exc.column - 1) from None
        values[key] = _convert(key, raw, lineno, val_col)
    return replace(base or RunConfig(), **values)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
