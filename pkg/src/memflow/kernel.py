"""Memory kernels built from exponential-polynomial terms.

A kernel is a finite sum of terms ``c * t**m * exp(lam*t) * g(mu*t)`` with
``g`` one of ``1``, ``cos`` or ``sin``.  Every derivative has a closed form,
so derivative evaluation is exact up to floating-point rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from memflow.errors import KernelParseError, MemflowError, SmoothnessError

Oscillation = Literal["none", "cos", "sin"]

CK_SAFETY = 1.01
CK_SAMPLES = 4097


@dataclass(frozen=True)
class Term:
    coeff: float
    power: int = 0
    rate: float = 0.0
    oscillation: Oscillation = "none"
    freq: float = 0.0

    def __post_init__(self):
        if self.power < 0 or int(self.power) != self.power:
            raise MemflowError(f"term power must be a nonnegative integer, got {self.power}")
        if self.oscillation not in ("none", "cos", "sin"):
            raise MemflowError(f"unknown oscillation {self.oscillation!r}")

    def deriv(self, k: int, t: np.ndarray) -> np.ndarray:
        m = self.power
        if self.oscillation == "none":
            z: complex | float = self.rate
        else:
            z = complex(self.rate, self.freq)
        acc = np.zeros(t.shape, dtype=complex if isinstance(z, complex) else float)
        for i in range(min(k, m) + 1):
            c = math.comb(k, i) * math.perm(m, i)
            acc = acc + c * t ** (m - i) * z ** (k - i)
        val = acc * np.exp(z * t)
        if self.oscillation == "cos":
            val = val.real
        elif self.oscillation == "sin":
            val = val.imag
        return self.coeff * val

    def taylor_degree(self) -> int:
        # order of the smallest constant-coefficient ODE the term satisfies
        return (self.power + 1) * (1 if self.oscillation == "none" else 2)


@dataclass(frozen=True)
class MemoryKernel:
    """Real kernel ``M(t) = sum of terms`` on ``t >= 0``.

    ``smoothness_order`` caps the derivative orders the kernel may be asked
    for; ``math.inf`` marks an analytic kernel.  A finite cap models a
    kernel that is only ``C^k`` and makes every consumer reject higher orders.
    """

    terms: tuple[Term, ...]
    smoothness_order: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise MemflowError("kernel needs at least one term")
        if self.smoothness_order < 0:
            raise MemflowError("smoothness_order must be nonnegative")
        if not self._is_nonzero():
            raise MemflowError("kernel is identically zero")

    # -- constructors -----------------------------------------------------
    @classmethod
    def exponential(cls, alpha: float, lam: float) -> "MemoryKernel":
        return cls((Term(alpha, 0, lam),))

    @classmethod
    def constant(cls, c: float = 1.0) -> "MemoryKernel":
        return cls((Term(c, 0, 0.0),))

    @classmethod
    def from_spec(cls, text: str, smoothness_order: float = math.inf) -> "MemoryKernel":
        return cls(parse_terms(text), smoothness_order)

    def with_smoothness(self, order: float) -> "MemoryKernel":
        return MemoryKernel(self.terms, order)

    def scaled(self, factor: float) -> "MemoryKernel":
        terms = tuple(Term(factor * tm.coeff, tm.power, tm.rate, tm.oscillation, tm.freq) for tm in self.terms)
        return MemoryKernel(terms, self.smoothness_order)

    # -- evaluation -------------------------------------------------------
    def check_order(self, k: int) -> None:
        if k < 0:
            raise MemflowError(f"derivative order must be nonnegative, got {k}")
        if k > self.smoothness_order:
            raise SmoothnessError(
                f"derivative order {k} exceeds smoothness order {self.smoothness_order}"
            )

    def deriv(self, k: int, t):
        """``d^k M / dt^k`` at ``t`` (scalar or array, ``t >= 0``)."""
        self.check_order(k)
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise MemflowError("kernel evaluated at negative time")
        out = sum(term.deriv(k, arr) for term in self.terms)
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self.deriv(0, t)

    def taylor(self, k: int) -> float:
        return self.deriv(k, 0.0)

    def ck_norm(self, k: int, T: float) -> float:
        return ck_norm(self, k, T)

    def spec(self) -> str:
        return format_terms(self.terms)

    def _is_nonzero(self) -> bool:
        scale = sum(abs(tm.coeff) for tm in self.terms)
        if scale == 0.0:
            return False
        degree = sum(tm.taylor_degree() for tm in self.terms)
        top = int(min(degree - 1, self.smoothness_order))
        z = np.zeros(())
        for k in range(top + 1):
            val = sum(float(tm.deriv(k, z)) for tm in self.terms)
            if abs(val) > 1e-14 * scale * max(1.0, max(abs(tm.rate) + abs(tm.freq) for tm in self.terms)) ** k:
                return True
        samples = np.linspace(0.0, 1.0, 33)
        return bool(np.any(np.abs(sum(tm.deriv(0, samples) for tm in self.terms)) > 1e-14 * scale))


def eval_deriv(kernel: MemoryKernel, k: int, t):
    return kernel.deriv(k, t)


def taylor_at_zero(kernel: MemoryKernel, k: int) -> float:
    return kernel.taylor(k)


@lru_cache(maxsize=4096)
def _ck_norm_cached(kernel: MemoryKernel, k: int, T: float) -> float:
    if T == 0.0:
        pts = np.zeros(1)
    else:
        pts = np.linspace(0.0, T, CK_SAMPLES)
    total = 0.0
    for order in range(k + 1):
        total += float(np.max(np.abs(kernel.deriv(order, pts))))
    return CK_SAFETY * total


def ck_norm(kernel: MemoryKernel, k: int, T: float) -> float:
    """Inflated ``C^k([0, T])`` norm: ``1.01 * sum_{l<=k} sup |M^(l)|``.

    The sup is taken over a dense uniform sample including both endpoints;
    the 1.01 factor keeps bounds that consume the norm on the safe side.
    ``T = 0`` is accepted and gives the pointwise value at the origin.
    """
    kernel.check_order(k)
    if T < 0:
        raise MemflowError("ck_norm needs T >= 0")
    return _ck_norm_cached(kernel, int(k), float(T))


# -- kernel specification strings -----------------------------------------

_REAL = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKENS = [
    ("coeff", re.compile(_REAL), "expected a real coefficient"),
    ("lit", re.compile(r"\*\s*t\s*\^"), "expected '*t^'"),
    ("power", re.compile(r"\d+"), "expected an integer power"),
    ("lit", re.compile(r"\*\s*exp\s*\("), "expected '*exp('"),
    ("rate", re.compile(_REAL), "expected a real rate"),
    ("lit", re.compile(r"\)"), "expected ')'"),
]
_OSC = re.compile(r"\*\s*(cos|sin)\s*\(")
_WS = re.compile(r"\s*")


def _parse_one(text: str, pos: int) -> tuple[Term, int]:
    fields: dict[str, str] = {}
    for name, pattern, message in _TOKENS:
        pos = _WS.match(text, pos).end()
        m = pattern.match(text, pos)
        if m is None:
            raise KernelParseError(message, text, pos + 1)
        if name != "lit":
            fields[name] = m.group(0)
        pos = m.end()
    pos = _WS.match(text, pos).end()
    osc: Oscillation = "none"
    freq = 0.0
    m = _OSC.match(text, pos)
    if m is not None:
        osc = m.group(1)  # type: ignore[assignment]
        pos = _WS.match(text, m.end()).end()
        f = re.compile(_REAL).match(text, pos)
        if f is None:
            raise KernelParseError("expected a real frequency", text, pos + 1)
        freq = float(f.group(0))
        pos = _WS.match(text, f.end()).end()
        if not text.startswith(")", pos):
            raise KernelParseError("expected ')'", text, pos + 1)
        pos += 1
    term = Term(float(fields["coeff"]), int(fields["power"]), float(fields["rate"]), osc, freq)
    return term, pos


def parse_terms(text: str) -> tuple[Term, ...]:
    """Parse ``"c*t^m*exp(l)[*cos(u)|*sin(u)]"`` terms separated by ``;``."""
    terms = []
    pos = 0
    while True:
        term, pos = _parse_one(text, pos)
        terms.append(term)
        pos = _WS.match(text, pos).end()
        if pos == len(text):
            break
        if text[pos] != ";":
            raise KernelParseError("expected ';' or end of input", text, pos + 1)
        pos += 1
        if _WS.match(text, pos).end() == len(text):
            break
    return tuple(terms)


def format_terms(terms: Iterable[Term]) -> str:
    parts = []
    for tm in terms:
        s = f"{tm.coeff!r}*t^{tm.power}*exp({tm.rate!r})"
        if tm.oscillation != "none":
            s += f"*{tm.oscillation}({tm.freq!r})"
        parts.append(s)
    return ";".join(parts)
