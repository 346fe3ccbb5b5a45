"""Wrapped drift evaluators.

These stand in for V' where the drift is built from a polynomial base by
clamping or piecewise scaling. They expose the same evaluation interface as
FunctionSpec (call, derivative, parity, tail) plus the kink locations that
quadrature panels must respect.
"""
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from src.core.errors import ValidationError
from src.core.models import FunctionSpec


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_slope(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


class _Derivative:
    """Callable derivative of a wrapped drift."""

    def __init__(self, owner):
        self._owner = owner

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._owner._slope(x)
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self._owner.breakpoints

    is_polynomial = False


class _WrappedDrift:
    base: FunctionSpec

    is_polynomial = False

    @property
    def tail(self) -> FunctionSpec:
        return self.base.tail

    @property
    def degree(self) -> int:
        return self.base.degree

    @property
    def leading_coefficient(self) -> float:
        return self.base.leading_coefficient

    @property
    def trig_bound(self) -> float:
        return self.base.trig_bound

    def is_odd(self, tol: float = 0.0) -> bool:
        return self.base.is_odd()

    def is_even(self, tol: float = 0.0) -> bool:
        return False

    def derivative(self) -> _Derivative:
        return _Derivative(self)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._value(x)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DominatingDrift(_WrappedDrift):
    """V'_D: keeps (-V')_+ on [0, x*] and -(-V')_- beyond, extended oddly.

    `kinks` are the positive interior roots of the base where the clamp
    switches on or off.
    """
    base: FunctionSpec
    x_star: float
    kinks: Tuple[float, ...] = ()

    description = "dominating bistable drift"
    is_smooth = False

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        pos = sorted(set(self.kinks) | {self.x_star})
        return tuple([-p for p in reversed(pos)] + [0.0] + pos)

    def _value(self, x):
        y = np.abs(x)
        neg = -self.base(y)  # -V' on the positive half-line
        clamped = np.where(y <= self.x_star, np.maximum(neg, 0.0), np.minimum(neg, 0.0))
        return -np.sign(x) * clamped

    def _slope(self, x):
        y = np.abs(x)
        neg = -self.base(y)
        active = np.where(y <= self.x_star, neg > 0.0, neg < 0.0)
        return np.where(active, self.base.derivative()(y), 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "dominating", "base": self.base.to_dict(), "x_star": self.x_star,
                "kinks": list(self.kinks)}


@dataclass(frozen=True)
class BlendedScaleDrift(_WrappedDrift):
    """Base drift scaled by alpha1 on [0, x1], alpha2 on [x2, x*], 1 elsewhere.

    The scale is an even function of x, blended by a C1 smoothstep over a band
    of width `band` centred on each junction, so the result stays odd and
    continuously differentiable.
    """
    base: FunctionSpec
    x1: float
    x2: float
    x_star: float
    alpha1: float = 1.0
    alpha2: float = 1.0
    band: float = 0.01

    description = "piecewise-scaled multi-well drift"
    is_smooth = False  # C1 only

    def _junctions(self):
        return ((self.x1, self.alpha1, 1.0), (self.x2, 1.0, self.alpha2), (self.x_star, self.alpha2, 1.0))

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        half = 0.5 * self.band
        edges = sorted({j + s * half for j, _, _ in self._junctions() for s in (-1.0, 1.0)})
        return tuple([-e for e in reversed(edges)] + [0.0] + edges)

    def scale(self, y):
        y = np.asarray(y, dtype=float)
        s = np.full_like(y, self.alpha1)
        for junction, left, right in self._junctions():
            t = (y - junction) / self.band + 0.5
            s = s + (right - left) * _smoothstep(t)
        return s

    def _scale_slope(self, y):
        ds = np.zeros_like(y)
        for junction, left, right in self._junctions():
            t = (y - junction) / self.band + 0.5
            ds = ds + (right - left) * _smoothstep_slope(t) / self.band
        return ds

    def _value(self, x):
        return self.scale(np.abs(x)) * self.base(x)

    def _slope(self, x):
        y = np.abs(x)
        return self._scale_slope(y) * np.sign(x) * self.base(x) + self.scale(y) * self.base.derivative()(x)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "blended", "base": self.base.to_dict(), "x1": self.x1, "x2": self.x2,
                "x_star": self.x_star, "alpha1": self.alpha1, "alpha2": self.alpha2, "band": self.band}


def drift_from_dict(data: Dict[str, Any], name: str = "v_prime"):
    kind = data.get("kind")
    try:
        raw = data["base"]
        if isinstance(raw, dict) and "kind" in raw:
            base = drift_from_dict(raw, f"{name}.base")
        else:
            base = FunctionSpec.from_dict(raw, f"{name}.base")
        if kind == "dominating":
            return DominatingDrift(base, float(data["x_star"]), tuple(float(k) for k in data.get("kinks", [])))
        if kind == "blended":
            return BlendedScaleDrift(
                base, float(data["x1"]), float(data["x2"]), float(data["x_star"]),
                float(data.get("alpha1", 1.0)), float(data.get("alpha2", 1.0)), float(data.get("band", 0.01)),
            )
    except KeyError as exc:
        raise ValidationError(f"{name}.{exc.args[0]}", "required field missing") from exc
    raise ValidationError(f"{name}.kind", f"unknown drift kind {kind!r}")
