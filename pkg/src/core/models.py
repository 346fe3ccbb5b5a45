"""Core domain models."""
import math
from dataclasses import dataclass, asdict, field, replace
from typing import Optional, Dict, Any, List, NamedTuple, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from src.core.errors import ValidationError

# Coefficients below this magnitude count as zero in parity and degree checks.
PARITY_TOL = 1e-12

# Distinguishes a wrapped drift from a plain function in serialised models.
_FUNCTION_KEYS = {"poly", "trig", "description"}


def _as_term(term) -> Tuple[float, float, float]:
    values = tuple(float(v) for v in term)
    if len(values) == 2:
        return values + (0.0,)
    if len(values) != 3:
        raise ValueError(f"trig term needs (amplitude, frequency[, phase]), got {term!r}")
    return values


@dataclass(frozen=True)
class FunctionSpec:
    """Polynomial plus cosine perturbation terms.

    `poly_coeffs` are ascending-degree coefficients. Each trig term
    `(amplitude, frequency, phase)` contributes `amplitude*cos(frequency*x + phase)`.
    """
    poly_coeffs: Tuple[float, ...] = (0.0,)
    trig_terms: Tuple[Tuple[float, float, float], ...] = ()
    description: str = ""

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.poly_coeffs) or (0.0,)
        terms = tuple(_as_term(t) for t in self.trig_terms)
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("polynomial coefficients must be finite")
        if not all(math.isfinite(v) for t in terms for v in t):
            raise ValueError("trig terms must be finite")
        object.__setattr__(self, "poly_coeffs", coeffs)
        object.__setattr__(self, "trig_terms", terms)

    # Wrapped drifts share this interface; plain functions have no kinks.
    breakpoints: Tuple[float, ...] = field(default=(), init=False, repr=False, compare=False)

    @property
    def tail(self) -> "FunctionSpec":
        """Function that governs the behaviour as |x| grows."""
        return self

    @property
    def is_polynomial(self) -> bool:
        return not any(amp != 0.0 for amp, _, _ in self.trig_terms)

    @property
    def is_smooth(self) -> bool:
        return True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, self.poly_coeffs)
        for amp, freq, phase in self.trig_terms:
            out = out + amp * np.cos(freq * x + phase)
        return float(out) if out.ndim == 0 else out

    def derivative(self) -> "FunctionSpec":
        coeffs = tuple(P.polyder(self.poly_coeffs)) if len(self.poly_coeffs) > 1 else (0.0,)
        # d/dx cos(fx + p) = f cos(fx + p + pi/2)
        terms = tuple(
            (amp * freq, freq, phase + math.pi / 2)
            for amp, freq, phase in self.trig_terms
            if freq != 0.0 and amp != 0.0
        )
        return FunctionSpec(coeffs, terms, f"d/dx {self.description}".strip())

    def antiderivative(self, x):
        """Exact integral from 0 to x."""
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, P.polyint(self.poly_coeffs, lbnd=0.0))
        for amp, freq, phase in self.trig_terms:
            if freq == 0.0:
                out = out + amp * math.cos(phase) * x
            else:
                out = out + (amp / freq) * (np.sin(freq * x + phase) - math.sin(phase))
        return float(out) if out.ndim == 0 else out

    @property
    def degree(self) -> int:
        for i in range(len(self.poly_coeffs) - 1, -1, -1):
            if abs(self.poly_coeffs[i]) > PARITY_TOL:
                return i
        return 0

    @property
    def leading_coefficient(self) -> float:
        return self.poly_coeffs[self.degree]

    @property
    def trig_bound(self) -> float:
        """Upper bound on the magnitude of the trig part."""
        return sum(abs(amp) for amp, _, _ in self.trig_terms)

    def is_odd(self, tol: float = PARITY_TOL) -> bool:
        if any(abs(c) > tol for c in self.poly_coeffs[0::2]):
            return False
        # cos(fx + p) is odd only when cos(p) = 0
        return all(amp == 0.0 or abs(math.cos(phase)) <= tol for amp, _, phase in self.trig_terms)

    def is_even(self, tol: float = PARITY_TOL) -> bool:
        if any(abs(c) > tol for c in self.poly_coeffs[1::2]):
            return False
        return all(amp == 0.0 or freq == 0.0 or abs(math.sin(phase)) <= tol
                   for amp, freq, phase in self.trig_terms)

    def scaled(self, factor: float) -> "FunctionSpec":
        return FunctionSpec(
            tuple(factor * c for c in self.poly_coeffs),
            tuple((factor * amp, freq, phase) for amp, freq, phase in self.trig_terms),
            self.description,
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"poly": list(self.poly_coeffs)}
        if self.trig_terms:
            data["trig"] = [
                [amp, freq] if phase == 0.0 else [amp, freq, phase]
                for amp, freq, phase in self.trig_terms
            ]
        if self.description:
            data["description"] = self.description
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any], name: str = "function") -> "FunctionSpec":
        if not isinstance(data, dict):
            raise ValidationError(name, "expected an object with 'poly' and optional 'trig'")
        unknown = set(data) - _FUNCTION_KEYS
        if unknown:
            raise ValidationError(f"{name}.{sorted(unknown)[0]}", "unknown field")
        poly = data.get("poly", [0.0])
        if not isinstance(poly, list) or not all(_is_number(c) for c in poly):
            raise ValidationError(f"{name}.poly", "expected a list of numbers")
        trig = data.get("trig", [])
        if not isinstance(trig, list) or not all(
            isinstance(t, list) and len(t) in (2, 3) and all(_is_number(v) for v in t) for t in trig
        ):
            raise ValidationError(f"{name}.trig", "expected a list of [amplitude, frequency(, phase)]")
        try:
            return FunctionSpec(tuple(poly), tuple(tuple(t) for t in trig), str(data.get("description", "")))
        except ValueError as exc:
            raise ValidationError(name, str(exc)) from exc


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


Drift = Union[FunctionSpec, Any]


@dataclass(frozen=True)
class DiffusionSpec:
    """k^2 together with its certified lower bound epsilon."""
    k_squared: FunctionSpec = FunctionSpec((1.0,))
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def is_constant(self) -> bool:
        return self.k_squared.degree == 0 and self.k_squared.is_polynomial

    def k(self, x):
        return np.sqrt(self.k_squared(x))


@dataclass(frozen=True)
class ModelSpec:
    """One MV-SDE instance: V', P', k and the interaction strength theta."""
    v_prime: Drift
    p_prime: FunctionSpec
    diffusion: DiffusionSpec = DiffusionSpec()
    theta: float = 1.0
    description: str = ""

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")

    @property
    def k_squared(self) -> FunctionSpec:
        return self.diffusion.k_squared

    @property
    def is_symmetric(self) -> bool:
        return self.v_prime.is_odd() and self.p_prime.is_odd() and self.k_squared.is_even()

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(self.v_prime.breakpoints)

    def with_theta(self, theta: float) -> "ModelSpec":
        return replace(self, theta=float(theta))

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "v_prime": self.v_prime.to_dict(),
            "p_prime": self.p_prime.to_dict(),
            "k_squared": self.k_squared.to_dict(),
            "epsilon": self.diffusion.epsilon,
            "theta": self.theta,
        }
        if self.description:
            data["description"] = self.description
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any], name: str = "model") -> "ModelSpec":
        if not isinstance(data, dict):
            raise ValidationError(name, "expected an object")
        allowed = {"v_prime", "p_prime", "k_squared", "epsilon", "theta", "description"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"{name}.{sorted(unknown)[0]}", "unknown field")
        for key in ("v_prime", "p_prime", "theta"):
            if key not in data:
                raise ValidationError(f"{name}.{key}", "required field missing")
        theta = data["theta"]
        if not _is_number(theta) or theta <= 0:
            raise ValidationError(f"{name}.theta", "must be a positive number")
        epsilon = data.get("epsilon", 1.0)
        if not _is_number(epsilon) or epsilon <= 0:
            raise ValidationError(f"{name}.epsilon", "must be a positive number")
        k_squared = FunctionSpec.from_dict(data.get("k_squared", {"poly": [1.0]}), f"{name}.k_squared")
        return ModelSpec(
            v_prime=_drift_from_dict(data["v_prime"], f"{name}.v_prime"),
            p_prime=FunctionSpec.from_dict(data["p_prime"], f"{name}.p_prime"),
            diffusion=DiffusionSpec(k_squared, float(epsilon)),
            theta=float(theta),
            description=str(data.get("description", "")),
        )


def _drift_from_dict(data: Dict[str, Any], name: str) -> Drift:
    if isinstance(data, dict) and "kind" in data:
        from src.drifts import drift_from_dict

        return drift_from_dict(data, name)
    return FunctionSpec.from_dict(data, name)


# --- model module reports -------------------------------------------------


class Zero(NamedTuple):
    location: float
    simple: bool


@dataclass(frozen=True)
class ModeEstimate:
    """Mode of the stationary density; `locations` lists every tied maximiser."""
    location: float
    tie: bool = False
    locations: Tuple[float, ...] = ()


@dataclass(frozen=True)
class ThetaStar:
    theta: float
    found: bool


@dataclass(frozen=True)
class AssumptionCheck:
    id: int
    label: str
    section: str
    holds: Optional[bool]
    witness: Optional[float] = None
    notes: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    regime: str
    checks: Tuple[AssumptionCheck, ...]

    @property
    def all_hold(self) -> bool:
        return all(c.holds is True for c in self.checks)

    def get(self, label: str) -> AssumptionCheck:
        for check in self.checks:
            if check.label == label:
                return check
        raise KeyError(label)

    def failures(self) -> List[AssumptionCheck]:
        return [c for c in self.checks if c.holds is False]

    def to_dict(self) -> Dict[str, Any]:
        return {"regime": self.regime, "all_hold": self.all_hold, "checks": [asdict(c) for c in self.checks]}


# --- selfconsistency ------------------------------------------------------


class RootEntry(NamedTuple):
    m: float
    residual: float
    slope_sign: int


@dataclass(frozen=True)
class RootReport:
    sigma: float
    roots: Tuple[RootEntry, ...]
    scan_window: Tuple[float, float]
    grid_points: int

    @property
    def count(self) -> int:
        return len(self.roots)

    @property
    def locations(self) -> List[float]:
        return [r.m for r in self.roots]

    @property
    def positive_roots(self) -> List[float]:
        return [r.m for r in self.roots if r.m > 0.0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "roots": [r._asdict() for r in self.roots],
            "scan_window": list(self.scan_window),
            "grid_points": self.grid_points,
        }


@dataclass(frozen=True)
class SeriesCoefficients:
    """Odd series coefficients at m = 0, in units of the shifted density.

    `I` holds I(2n-1); entries too large for a float are +/-inf, with the
    exact magnitude kept in `log_abs_I`.
    """
    sigma: float
    n_max: int
    I: Tuple[float, ...]
    I_scaled: Tuple[float, ...]
    parts: Tuple[Tuple[float, float, float], ...]
    x_star: float
    log_abs_I: Tuple[float, ...] = ()
    signs: Tuple[int, ...] = ()
    even_checks: Tuple[float, ...] = ()
    n_c: int = 0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["I"] = [v if math.isfinite(v) else None for v in self.I]
        return data


# --- critical -------------------------------------------------------------


@dataclass(frozen=True)
class CriticalResult:
    sigma_c: Optional[float]
    bracket: Tuple[float, float]
    iterations: int
    d_at_root_slope: Optional[float] = None
    diagnostics: str = ""
    d_at_floor: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["bracket"] = list(self.bracket)
        return data


@dataclass(frozen=True)
class CriticalCurve:
    thetas: Tuple[float, ...]
    sigma_stars: Tuple[float, ...]
    monotone: bool
    slopes: Tuple[Optional[float], ...] = ()
    failures: Tuple[Tuple[float, str], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "thetas": list(self.thetas),
            "sigma_stars": list(self.sigma_stars),
            "monotone": self.monotone,
            "slopes": list(self.slopes),
            "failures": [list(f) for f in self.failures],
        }

    def to_rows(self) -> List[List[Any]]:
        return [[t, s] for t, s in zip(self.thetas, self.sigma_stars)]


@dataclass(frozen=True)
class PhaseDiagram:
    sigmas: Tuple[float, ...]
    roots_per_sigma: Tuple[Optional[RootReport], ...]
    transition_estimates: Tuple[float, ...]
    failures: Tuple[Tuple[float, str], ...] = ()

    @property
    def counts(self) -> List[Optional[int]]:
        return [r.count if r is not None else None for r in self.roots_per_sigma]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigmas": list(self.sigmas),
            "roots_per_sigma": [r.to_dict() if r is not None else None for r in self.roots_per_sigma],
            "transition_estimates": list(self.transition_estimates),
            "failures": [list(f) for f in self.failures],
        }

    def to_rows(self) -> Tuple[List[str], List[List[Any]]]:
        width = max([c for c in self.counts if c is not None] or [0])
        header = ["sigma", "n_roots"] + [f"m_{i + 1}" for i in range(width)]
        rows = []
        for sigma, report in zip(self.sigmas, self.roots_per_sigma):
            if report is None:
                rows.append([sigma, ""] + [""] * width)
                continue
            locs = report.locations
            rows.append([sigma, report.count] + locs + [""] * (width - len(locs)))
        return header, rows


@dataclass(frozen=True)
class UpperEstimate:
    """Dominating bound on the upper critical threshold and its scan estimate."""
    bound: float
    scan_estimate: float
    sigma_c_dominating: Optional[float] = None
    sigma_r: float = 0.0

    def __iter__(self):
        return iter((self.bound, self.scan_estimate))


@dataclass(frozen=True)
class C2fgReport:
    x_star: float
    margin1: float
    margin2: float
    witness1: Optional[float] = None
    witness2: Optional[float] = None

    @property
    def holds1(self) -> bool:
        return self.witness1 is None

    @property
    def holds2(self) -> bool:
        return self.witness2 is None

    @property
    def holds(self) -> bool:
        return self.holds1 and self.holds2

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(holds1=self.holds1, holds2=self.holds2)
        return data


@dataclass(frozen=True)
class VainillaRow:
    sigma: float
    ii5: float
    ii1: float
    ii2: float

    @property
    def passes(self) -> Tuple[bool, bool, bool]:
        return self.ii5 > 0.0, self.ii1 > 0.0, self.ii2 > 0.0


@dataclass(frozen=True)
class VainillaReport:
    theta: float
    sigma_r: float
    rows: Tuple[VainillaRow, ...]

    @property
    def all_pass(self) -> bool:
        return all(all(row.passes) for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "sigma_r": self.sigma_r,
            "all_pass": self.all_pass,
            "rows": [dict(asdict(row), passes=list(row.passes)) for row in self.rows],
        }


# --- particle -------------------------------------------------------------


@dataclass(frozen=True)
class InitLaw:
    """Initial law: point(x0), uniform(lo, hi) or gaussian(mu, sd)."""
    kind: str = "point"
    params: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        arity = {"point": 1, "uniform": 2, "gaussian": 2}
        if self.kind not in arity:
            raise ValueError(f"unknown initial law {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != arity[self.kind]:
            raise ValueError(f"{self.kind} law takes {arity[self.kind]} parameters")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": list(self.params)}


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    n: int
    seed: int
    dt: float
    time: float = 0.0
    steps: int = 0
    mean_trace: Tuple[Tuple[float, float], ...] = ()
    antithetic: bool = False


class MeanEstimate(NamedTuple):
    mean: float
    stderr: float
