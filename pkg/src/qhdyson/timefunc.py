"""Closed catalog of scalar time-dependent coefficients.

Every form evaluates its value and its analytic first derivative on scalars
or numpy arrays. Forms built on ``tan`` or ``sec`` also list their poles so
that time grids can keep clear of them.

Descriptors are tagged JSON records, e.g.::

    {"form": "sinusoid", "amp": 0.2, "freq": 1.0, "phase": 0.0, "offset": 1.0}

Complex parameters are written as ``{"re": x, "im": y}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigInvalid


def parse_complex(raw, path: str = "value") -> complex:
    if isinstance(raw, bool):
        raise ConfigInvalid(path, "expected a number")
    if isinstance(raw, (int, float)):
        return complex(raw)
    if isinstance(raw, dict):
        extra = set(raw) - {"re", "im"}
        if extra:
            raise ConfigInvalid(f"{path}.{sorted(extra)[0]}", "unknown key")
        try:
            return complex(float(raw.get("re", 0.0)), float(raw.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ConfigInvalid(path, "re/im must be numbers") from None
    raise ConfigInvalid(path, f"expected a number or {{'re', 'im'}} record, got {raw!r}")


def dump_complex(z: complex):
    z = complex(z)
    if z.imag == 0.0:
        return z.real
    return {"re": z.real, "im": z.imag}


def _simplify(x):
    # Keep real-valued forms real so downstream gates see float arrays.
    x = np.asarray(x)
    if np.iscomplexobj(x) and not np.any(x.imag):
        x = x.real
    return x if x.ndim else x[()]


class TimeFunction:
    """Base class; subclasses implement ``_value`` and ``_derivative``."""

    form: str = ""

    def value(self, t):
        return _simplify(self._value(np.asarray(t, dtype=float)))

    def derivative(self, t):
        return _simplify(self._derivative(np.asarray(t, dtype=float)))

    __call__ = value

    def singularities(self, t0: float, t1: float) -> list[float]:
        """Poles inside the closed interval ``[t0, t1]``."""
        return []

    def distance_to_singularity(self, times) -> float:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        poles = self.singularities(times.min() - 1.0, times.max() + 1.0)
        if not poles:
            return math.inf
        return float(np.abs(times[:, None] - np.asarray(poles)[None, :]).min())

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(TimeFunction):
    c: complex = 0.0
    form = "constant"

    def _value(self, t):
        return np.full(t.shape, self.c, dtype=complex)

    def _derivative(self, t):
        return np.zeros(t.shape)

    def to_dict(self):
        return {"form": self.form, "value": dump_complex(self.c)}


@dataclass(frozen=True)
class Polynomial(TimeFunction):
    coeffs: tuple = (0.0,)
    form = "polynomial"

    def _value(self, t):
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs, dtype=complex))

    def _derivative(self, t):
        c = np.polynomial.polynomial.polyder(np.asarray(self.coeffs, dtype=complex))
        return np.polynomial.polynomial.polyval(t, c)

    def to_dict(self):
        return {"form": self.form, "coeffs": [dump_complex(c) for c in self.coeffs]}


@dataclass(frozen=True)
class Sinusoid(TimeFunction):
    amp: complex = 1.0
    freq: float = 1.0
    phase: float = 0.0
    offset: complex = 0.0
    form = "sinusoid"

    def _value(self, t):
        return self.offset + self.amp * np.sin(self.freq * t + self.phase)

    def _derivative(self, t):
        return self.amp * self.freq * np.cos(self.freq * t + self.phase)

    def to_dict(self):
        return {"form": self.form, "amp": dump_complex(self.amp), "freq": self.freq,
                "phase": self.phase, "offset": dump_complex(self.offset)}


@dataclass(frozen=True)
class Exponential(TimeFunction):
    amp: complex = 1.0
    rate: complex = 1.0
    offset: complex = 0.0
    form = "exponential"

    def _value(self, t):
        return self.offset + self.amp * np.exp(self.rate * t)

    def _derivative(self, t):
        return self.amp * self.rate * np.exp(self.rate * t)

    def to_dict(self):
        return {"form": self.form, "amp": dump_complex(self.amp),
                "rate": dump_complex(self.rate), "offset": dump_complex(self.offset)}


@dataclass(frozen=True)
class _Trig(TimeFunction):
    scale: complex = 1.0
    freq: float = 1.0
    phase: float = 0.0

    def _arg(self, t):
        return self.freq * t + self.phase

    def singularities(self, t0, t1):
        if self.freq == 0.0:
            return []
        # freq*t + phase = (k + 1/2) pi
        ends = sorted(((t0 * self.freq + self.phase) / math.pi - 0.5,
                       (t1 * self.freq + self.phase) / math.pi - 0.5))
        ks = range(math.ceil(ends[0]), math.floor(ends[1]) + 1)
        return [((k + 0.5) * math.pi - self.phase) / self.freq for k in ks]

    def to_dict(self):
        return {"form": self.form, "scale": dump_complex(self.scale),
                "freq": self.freq, "phase": self.phase}


@dataclass(frozen=True)
class TanScaled(_Trig):
    form = "tan_scaled"

    def _value(self, t):
        return self.scale * np.tan(self._arg(t))

    def _derivative(self, t):
        return self.scale * self.freq / np.cos(self._arg(t)) ** 2


@dataclass(frozen=True)
class SecScaled(_Trig):
    form = "sec_scaled"

    def _value(self, t):
        return self.scale / np.cos(self._arg(t))

    def _derivative(self, t):
        x = self._arg(t)
        return self.scale * self.freq * np.tan(x) / np.cos(x)


@dataclass(frozen=True)
class TanhScaled(_Trig):
    form = "tanh_scaled"

    def _value(self, t):
        return self.scale * np.tanh(self._arg(t))

    def _derivative(self, t):
        return self.scale * self.freq / np.cosh(self._arg(t)) ** 2

    def singularities(self, t0, t1):
        return []


@dataclass(frozen=True)
class Sum(TimeFunction):
    terms: tuple = ()
    form = "sum"

    def _value(self, t):
        return sum((np.asarray(f.value(t), dtype=complex) for f in self.terms),
                   np.zeros(t.shape, dtype=complex))

    def _derivative(self, t):
        return sum((np.asarray(f.derivative(t), dtype=complex) for f in self.terms),
                   np.zeros(t.shape, dtype=complex))

    def singularities(self, t0, t1):
        return sorted({p for f in self.terms for p in f.singularities(t0, t1)})

    def to_dict(self):
        return {"form": self.form, "terms": [f.to_dict() for f in self.terms]}


@dataclass(frozen=True)
class Scaled(TimeFunction):
    factor: complex = 1.0
    of: TimeFunction = Constant(1.0)
    form = "scaled"

    def _value(self, t):
        return self.factor * np.asarray(self.of.value(t), dtype=complex)

    def _derivative(self, t):
        return self.factor * np.asarray(self.of.derivative(t), dtype=complex)

    def singularities(self, t0, t1):
        return self.of.singularities(t0, t1)

    def to_dict(self):
        return {"form": self.form, "factor": dump_complex(self.factor), "of": self.of.to_dict()}


def _real(raw, path):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigInvalid(path, "expected a real number")
    return float(raw)


_FIELDS = {
    "constant": {"value": parse_complex},
    "polynomial": {"coeffs": None},
    "sinusoid": {"amp": parse_complex, "freq": _real, "phase": _real, "offset": parse_complex},
    "exponential": {"amp": parse_complex, "rate": parse_complex, "offset": parse_complex},
    "tan_scaled": {"scale": parse_complex, "freq": _real, "phase": _real},
    "sec_scaled": {"scale": parse_complex, "freq": _real, "phase": _real},
    "tanh_scaled": {"scale": parse_complex, "freq": _real, "phase": _real},
    "sum": {"terms": None},
    "scaled": {"factor": parse_complex, "of": None},
}
_CLASSES = {"sinusoid": Sinusoid, "exponential": Exponential, "tan_scaled": TanScaled,
            "sec_scaled": SecScaled, "tanh_scaled": TanhScaled}


def from_dict(raw, path: str = "function") -> TimeFunction:
    """Build a ``TimeFunction`` from its tagged descriptor (strict)."""
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return Constant(parse_complex(raw, path))
    if isinstance(raw, dict) and "form" not in raw and raw and set(raw) <= {"re", "im"}:
        return Constant(parse_complex(raw, path))
    if not isinstance(raw, dict):
        raise ConfigInvalid(path, "expected a TimeFunction descriptor")
    form = raw.get("form")
    if form not in _FIELDS:
        raise ConfigInvalid(f"{path}.form", f"unknown form {form!r}")
    fields = _FIELDS[form]
    for key in raw:
        if key != "form" and key not in fields:
            raise ConfigInvalid(f"{path}.{key}", "unknown key")
    if form == "constant":
        return Constant(parse_complex(raw.get("value", 0.0), f"{path}.value"))
    if form == "polynomial":
        coeffs = raw.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigInvalid(f"{path}.coeffs", "expected a non-empty list")
        return Polynomial(tuple(parse_complex(c, f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)))
    if form == "sum":
        terms = raw.get("terms")
        if not isinstance(terms, list) or not terms:
            raise ConfigInvalid(f"{path}.terms", "expected a non-empty list")
        return Sum(tuple(from_dict(f, f"{path}.terms[{i}]") for i, f in enumerate(terms)))
    if form == "scaled":
        if "of" not in raw:
            raise ConfigInvalid(f"{path}.of", "missing")
        return Scaled(parse_complex(raw.get("factor", 1.0), f"{path}.factor"),
                      from_dict(raw["of"], f"{path}.of"))
    kwargs = {k: fields[k](v, f"{path}.{k}") for k, v in raw.items() if k != "form"}
    return _CLASSES[form](**kwargs)
