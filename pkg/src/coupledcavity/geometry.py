"""Cavity description, ray-matrix algebra and Horwitz scaling parameters.

All lengths are SI metres.  The cavity is two unstable strip half-cavities of
length ``l`` sharing a central bi-convex mirror of radius ``r`` and half-width
``a``; each half-cavity is closed by a concave end mirror of radius ``R``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace

from .errors import DegenerateKernelError, DomainError

DET_RTOL = 1e-12


@dataclass(frozen=True)
class CavityGeometry:
    R: float
    r: float
    l: float
    a: float
    lambda_: float

    def __post_init__(self):
        for name in ("R", "r", "l", "a", "lambda_"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")
        if self.a >= self.l / 5:
            warnings.warn(
                f"aperture half-width a={self.a:g} m is not small against l={self.l:g} m; "
                "the paraxial kernel may be inaccurate",
                stacklevel=3,
            )

    @property
    def L(self) -> float:
        """Whole-cavity length, end mirror to end mirror."""
        return 2.0 * self.l

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    def with_chirp(self, t: float) -> "CavityGeometry":
        """Copy of this geometry with the wavelength chosen so that ``t = pi*M*F``."""
        hp = horwitz_params(self)
        lam = self.lambda_ * hp.t / t
        return replace(self, lambda_=lam)

    def require_globally_stable(self):
        if not self.L < 2 * self.R:
            raise DomainError(
                f"coupled cavity requires L < 2R (L={self.L:g}, R={self.R:g})"
            )


@dataclass(frozen=True)
class ABCDMatrix:
    A: float
    B: float
    C: float
    D: float

    def __post_init__(self):
        scale = max(abs(self.A * self.D), abs(self.B * self.C), 1.0)
        if abs(self.det - 1.0) > DET_RTOL * scale:
            raise DomainError(f"ray matrix is not unimodular: det = {self.det!r}")

    @property
    def det(self) -> float:
        return self.A * self.D - self.B * self.C

    @property
    def trace(self) -> float:
        return self.A + self.D

    @property
    def half_trace(self) -> float:
        return 0.5 * (self.A + self.D)

    @property
    def is_degenerate(self) -> bool:
        return self.B == 0.0

    def __matmul__(self, other: "ABCDMatrix") -> "ABCDMatrix":
        return ABCDMatrix(
            self.A * other.A + self.B * other.C,
            self.A * other.B + self.B * other.D,
            self.C * other.A + self.D * other.C,
            self.C * other.B + self.D * other.D,
        )

    def scaled(self, a: float) -> "ABCDMatrix":
        """Express the matrix in transverse units of ``a`` (B/a, C*a)."""
        return ABCDMatrix(self.A, self.B / a, self.C * a, self.D)

    def as_list(self):
        return [[self.A, self.B], [self.C, self.D]]


@dataclass(frozen=True)
class HorwitzParams:
    M: float
    F: float
    t: float

    def __post_init__(self):
        if isinstance(self.M, complex) or not math.isfinite(self.M):
            raise DomainError(f"magnification must be a finite real number, got {self.M!r}")
        if self.M < 1.0:
            raise DomainError(f"magnification M={self.M!r} < 1: sub-cavity is not unstable")
        if not self.F > 0:
            raise DomainError(f"Fresnel number must be positive, got {self.F!r}")


@dataclass(frozen=True)
class StabilityReport:
    whole_cavity_stable: bool
    subcavity_unstable: bool
    subcavity_stable: bool
    half_trace_m: float


def abcd_half_cavity(l: float, R: float, allow_degenerate: bool = False) -> ABCDMatrix:
    """Ray matrix for free space ``l``, concave mirror ``R``, free space ``l``.

    ``C`` is ``-2/R``: with that sign the matrix is unimodular.  ``B`` vanishes
    at ``l = 0`` and ``l = R``, where the Fresnel kernel is undefined; pass
    ``allow_degenerate=True`` to get the matrix anyway (``is_degenerate`` set).
    """
    if l < 0 or R <= 0:
        raise DomainError(f"need l >= 0 and R > 0, got l={l!r}, R={R!r}")
    AD = 1.0 - 2.0 * l / R
    B = 2.0 * l * (1.0 - l / R)
    m = ABCDMatrix(AD, B, -2.0 / R, AD)
    if m.is_degenerate and not allow_degenerate:
        raise DegenerateKernelError(f"B = 0 for l={l!r}, R={R!r}; propagator kernel is singular")
    return m


def abcd_convex_reflection(r: float) -> ABCDMatrix:
    if r <= 0:
        raise DomainError(f"convex mirror radius must be positive, got {r!r}")
    return ABCDMatrix(1.0, 0.0, 2.0 / r, 1.0)


def subcavity_roundtrip(geom: CavityGeometry) -> ABCDMatrix:
    """Round trip referenced to the central-mirror plane: half cavity, then convex mirror."""
    return abcd_convex_reflection(geom.r) @ abcd_half_cavity(geom.l, geom.R)


def magnification_from_trace(m: float) -> float:
    if abs(m) < 1.0:
        raise DomainError(f"|m| = {abs(m):g} < 1: stable sub-cavity has no real magnification")
    return m + math.sqrt(m * m - 1.0)


def _radicand(x: float, scale: float) -> float:
    # exact boundary cases (l = R - r) can land a few ulp below zero
    if x < 0 and x > -1e-14 * scale:
        return 0.0
    if x < 0:
        raise DomainError(f"negative radicand {x!r} in magnification formula")
    return x


def horwitz_params(geom: CavityGeometry) -> HorwitzParams:
    """Magnification ``M``, Fresnel number ``F`` and chirp ``t = pi*M*F``."""
    R, r, l, a, lam = geom.R, geom.r, geom.l, geom.a, geom.lambda_
    if l >= R:
        raise DomainError(f"l={l!r} >= R={R!r}: Fresnel number is not positive")
    scale = R * R
    s1 = _radicand((l + r) * (R - l), scale)
    s2 = _radicand(l * (R - r - l), scale)
    M = (math.sqrt(s1) + math.sqrt(s2)) ** 2 / (r * R)
    if 1.0 - 1e-12 < M < 1.0:
        # marginal geometry l = R - r, rounded below 1
        M = 1.0
    F = a * a / (2.0 * l * lam * (1.0 - l / R))
    return HorwitzParams(M=M, F=F, t=math.pi * M * F)


def classify_stability(geom: CavityGeometry) -> StabilityReport:
    """Geometric stability flags plus the round-trip half trace.

    For ``l < R`` the sub-cavity is unstable exactly when ``|m| > 1``.
    """
    R, r, l = geom.R, geom.r, geom.l
    rt = subcavity_roundtrip(geom)
    return StabilityReport(
        whole_cavity_stable=geom.L < 2 * R,
        subcavity_unstable=l < R - r,
        subcavity_stable=(R - r) < l < R,
        half_trace_m=rt.half_trace,
    )
