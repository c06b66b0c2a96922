"""Multiplicative distortion functions of the confounder."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InvalidDistortion, InvalidInput

DistortionFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ULaw:
    """Law of the confounder: ``uniform(a, b)`` or an empirical sample."""

    kind: str
    a: float = 0.0
    b: float = 1.0
    sample: np.ndarray | None = None

    @classmethod
    def uniform(cls, a: float, b: float) -> "ULaw":
        if not a < b:
            raise InvalidInput(f"uniform law needs a < b, got ({a}, {b})")
        return cls("uniform", a=float(a), b=float(b))

    @classmethod
    def empirical(cls, sample) -> "ULaw":
        s = np.asarray(sample, dtype=float).ravel()
        if s.size == 0 or not np.isfinite(s).all():
            raise InvalidInput("empirical law needs a nonempty finite sample")
        return cls("empirical", a=float(s.min()), b=float(s.max()), sample=s)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size)
        return rng.choice(self.sample, size=size, replace=True)

    def describe(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "a": self.a, "b": self.b}
        return {"kind": "empirical", "size": int(self.sample.size)}


@dataclass(frozen=True)
class DistortionSpec:
    """Response distortion ``psi`` and one predictor distortion per column."""

    psi: DistortionFn
    phi: Sequence[DistortionFn]
    u_law: ULaw
    name: str = "custom"

    @property
    def p(self) -> int:
        return len(self.phi)

    def psi_values(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.psi(u), dtype=float), u.shape)

    def phi_values(self, u) -> np.ndarray:
        """Return an ``(len(u), p)`` array of predictor distortions."""
        u = np.asarray(u, dtype=float)
        cols = [np.broadcast_to(np.asarray(f(u), dtype=float), u.shape) for f in self.phi]
        return np.column_stack(cols) if cols else np.empty((u.size, 0))


def _const_one(u):
    return np.ones_like(u, dtype=float)


def identity_distortions(p: int, u_law: ULaw | None = None) -> DistortionSpec:
    return DistortionSpec(
        psi=_const_one,
        phi=[_const_one] * p,
        u_law=u_law or ULaw.uniform(2.0, 6.0),
        name="identity",
    )


def paper_distortions() -> DistortionSpec:
    """Distortions of the four-coefficient benchmark with ``U ~ Uniform(2, 6)``.

    The normalizing constants are kept at their four-decimal reference values.
    """
    return DistortionSpec(
        psi=lambda u: (u + 3.0) / 7.0,
        phi=[
            lambda u: (u + 1.0) ** 2 / 26.3333,
            lambda u: (u + 10.0) / 14.0,
            lambda u: (u + 2.0) ** 2 / 37.3333,
        ],
        u_law=ULaw.uniform(2.0, 6.0),
        name="paper-5.2",
    )


def affine_distortions(slopes: Sequence[float], a: float = 2.0, b: float = 6.0) -> DistortionSpec:
    """Unit-mean affine family ``1 + s * (u - mean(U))`` under ``Uniform(a, b)``.

    ``slopes[0]`` applies to the response, the rest to the predictors.
    """
    if len(slopes) < 2:
        raise InvalidInput("need a response slope and at least one predictor slope")
    centre = 0.5 * (a + b)

    def make(s):
        return lambda u: 1.0 + s * (np.asarray(u, dtype=float) - centre)

    return DistortionSpec(
        psi=make(slopes[0]),
        phi=[make(s) for s in slopes[1:]],
        u_law=ULaw.uniform(a, b),
        name="affine",
    )


def polynomial_distortions(
    psi_coefs: Sequence[float],
    phi_coefs: Sequence[Sequence[float]],
    a: float,
    b: float,
    name: str = "polynomial",
) -> DistortionSpec:
    """Distortions given as polynomial coefficients in ``u``, lowest order first."""

    def make(coefs):
        c = np.asarray(coefs, dtype=float)[::-1]
        return lambda u: np.polyval(c, np.asarray(u, dtype=float))

    return DistortionSpec(
        psi=make(psi_coefs),
        phi=[make(c) for c in phi_coefs],
        u_law=ULaw.uniform(a, b),
        name=name,
    )


def distortion_from_dict(spec: dict) -> DistortionSpec:
    """``{"u": [a, b], "psi": [c0, c1, ...], "phi": [[...], ...]}``."""
    try:
        a, b = spec.get("u", (2.0, 6.0))
        return polynomial_distortions(
            spec["psi"], spec["phi"], float(a), float(b), spec.get("name", "polynomial")
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid distortion description: {exc}") from exc


CATALOGUE = {
    "identity": lambda p=3: identity_distortions(p),
    "paper-5.2": lambda p=3: paper_distortions(),
}


def catalogue_distortion(name: str, p: int = 3) -> DistortionSpec:
    try:
        factory = CATALOGUE[name]
    except KeyError:
        raise ConfigError(
            f"unknown distortion {name!r}; choose from {sorted(CATALOGUE)}"
        ) from None
    return factory(p)


def resolve_distortion(name_or_path: str, p: int = 3) -> DistortionSpec:
    """Catalogue name, or a JSON file holding a polynomial description."""
    if name_or_path in CATALOGUE:
        return catalogue_distortion(name_or_path, p)
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigError(
            f"unknown distortion {name_or_path!r}; choose from {sorted(CATALOGUE)} or a JSON file"
        )
    try:
        return distortion_from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"distortion file is not valid JSON: {exc}") from exc


@dataclass(frozen=True)
class IdentifiabilityReport:
    passed: bool
    psi_mean: float
    phi_means: list[float]
    phi_min: list[float]
    samples: int
    tol: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "psi_mean": self.psi_mean,
            "phi_means": self.phi_means,
            "phi_min": self.phi_min,
            "samples": self.samples,
            "tol": self.tol,
        }


def validate_identifiability(
    spec: DistortionSpec, samples: int = 1_000_000, tol: float = 0.01, seed: int = 0
) -> IdentifiabilityReport:
    """Monte Carlo check of unit means and positive predictor distortions."""
    if samples < 1000:
        raise InvalidInput("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    u = spec.u_law.draw(rng, samples)
    psi = spec.psi_values(u)
    phi = spec.phi_values(u)
    if not (np.isfinite(psi).all() and np.isfinite(phi).all()):
        raise InvalidDistortion("distortion function returned a non-finite value")
    psi_mean = float(psi.mean())
    phi_means = [float(v) for v in phi.mean(axis=0)]
    phi_min = [float(v) for v in phi.min(axis=0)]
    passed = (
        abs(psi_mean - 1.0) <= tol
        and all(abs(v - 1.0) <= tol for v in phi_means)
        and all(v > 0 for v in phi_min)
    )
    return IdentifiabilityReport(passed, psi_mean, phi_means, phi_min, samples, tol)
