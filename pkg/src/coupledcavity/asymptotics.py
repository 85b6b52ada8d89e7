"""Partial Fresnel integrals of the collimated kernel and their stationary-phase limit.

For the integrand ``exp(-i t (x - y/M)^2) g(x)`` the real line is split at
``x = -1`` and ``x = 1`` into three integrals: I1 over ``(1, inf)``, I2 over
``(-1, 1)`` and I3 over ``(-inf, -1)``.  The phase is stationary at
``x = y/M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryValueError, DomainError, UndersampledGridError

REGIONS = ("(-inf,-M)", "(-M,-1)", "(-1,1)", "(1,M)", "(M,inf)")
BOUNDARY_TOL = 1e-12
DECAY = 1e-8
PROBE_RADIUS = 1000.0
PHASE_STEP = math.pi / 32


@dataclass(frozen=True)
class RegionClass:
    y: float
    region: str
    contains_stationary: tuple


@dataclass(frozen=True)
class PartialIntegrals:
    i1: complex
    i2: complex
    i3: complex
    method: str
    t: float
    M: float
    y: float
    full: complex | None = None

    @property
    def total(self) -> complex:
        return self.i1 + self.i2 + self.i3

    @property
    def additivity(self) -> float:
        """``|I1 + I2 + I3 - full| / |full|`` for the quadrature method."""
        if self.full is None:
            return math.nan
        return abs(self.total - self.full) / abs(self.full)


def classify_stationary(y: float, M: float) -> RegionClass:
    """Which of I1, I2, I3 contains the stationary point ``x = y/M``."""
    if not M > 1:
        raise DomainError(f"magnification must exceed 1, got {M}")
    ay = abs(y)
    if abs(ay - 1.0) < BOUNDARY_TOL or abs(ay - M) < BOUNDARY_TOL * max(1.0, M):
        raise BoundaryValueError(f"y = {y} lies on a region boundary (|y| = 1 or |y| = M = {M})")
    if y < -M:
        region = REGIONS[0]
    elif y < -1:
        region = REGIONS[1]
    elif y < 1:
        region = REGIONS[2]
    elif y < M:
        region = REGIONS[3]
    else:
        region = REGIONS[4]
    contains = (y > M, -M < y < M, y < -M)
    return RegionClass(y, region, contains)


def decay_radius(g, probe_radius: float = PROBE_RADIUS, samples: int = 400001) -> float:
    """Smallest radius beyond which ``|g| < 1e-8 max|g|`` on a probe grid."""
    x = np.linspace(-probe_radius, probe_radius, samples)
    mag = np.abs(g(x))
    peak = mag.max()
    if not peak > 0:
        raise DomainError("test function vanishes identically")
    big = np.nonzero(mag >= DECAY * peak)[0]
    if big[0] == 0 or big[-1] == samples - 1:
        raise DomainError(f"test function does not decay below {DECAY:g} of its peak within |x| < {probe_radius}")
    return float(max(abs(x[big[0]]), abs(x[big[-1]])))


def _step(t: float, M: float, y: float, X: float, max_step: float | None) -> float:
    rate = 2.0 * t * (X + abs(y) / M)
    h = PHASE_STEP / rate
    if max_step is not None:
        h = min(h, max_step)
    # unit cells per aperture half-width, so that x = +-1 are cell boundaries
    return 1.0 / math.ceil(1.0 / h)


def eval_partial_integrals_quadrature(
    y: float, t: float, M: float, g, step: float | None = None
) -> PartialIntegrals:
    """Midpoint-rule values of I1, I2, I3 plus the full-line integral in one pass.

    The three node sets partition the full node set, and the I3 nodes are the
    mirror images of the I1 nodes taken in the same order.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not M > 1:
        raise DomainError(f"magnification must exceed 1, got {M}")
    X = max(2.0 * decay_radius(g), 2.0)
    h = _step(t, M, y, X, step)
    if 2.0 * t * (X + abs(y) / M) * h >= math.pi / 2:
        raise UndersampledGridError(f"quadrature step {h:g} undersamples t={t}")
    n_out = math.ceil((X - 1.0) / h)
    n_in = int(round(2.0 / h))
    k = np.arange(n_out) + 0.5
    x1 = 1.0 + k * h
    x3 = -x1
    x2 = -1.0 + (np.arange(n_in) + 0.5) * h
    c = y / M

    def f(x):
        d = x - c
        return np.exp(-1j * t * d * d) * g(x)

    f1, f2, f3 = f(x1), f(x2), f(x3)
    i1 = np.sum(f1) * h
    i2 = np.sum(f2) * h
    i3 = np.sum(f3) * h
    full = np.sum(np.concatenate([f3[::-1], f2, f1])) * h
    return PartialIntegrals(complex(i1), complex(i2), complex(i3), "quadrature", t, M, y, complex(full))


def stationary_phase_leading(y: float, t: float, M: float, g) -> complex:
    """Leading interior stationary-phase value ``sqrt(pi/(i t)) g(y/M)``.

    Endpoint contributions at ``x = +-1`` are of higher order and are not
    included.
    """
    rc = classify_stationary(y, M)
    if t < 10:
        raise DomainError(f"leading-order asymptotics need t >= 10, got {t}")
    if not any(rc.contains_stationary):
        return 0j
    return complex(np.sqrt(np.pi / (1j * t)) * g(np.asarray(y / M)))


def stationary_phase_partials(y: float, t: float, M: float, g) -> PartialIntegrals:
    """Leading-order value assigned to whichever integral holds the stationary point."""
    rc = classify_stationary(y, M)
    lead = stationary_phase_leading(y, t, M, g)
    vals = [lead if c else 0j for c in rc.contains_stationary]
    return PartialIntegrals(vals[0], vals[1], vals[2], "stationary_phase", t, M, y)


def gaussian(width: float = 1.0):
    """Even test function ``exp(-(x/width)^2)``."""
    def g(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(x / width) ** 2)
    return g


@dataclass(frozen=True)
class AsymptoticRow:
    y: float
    t: float
    M: float
    region: str
    quadrature: PartialIntegrals | None
    leading: complex | None

    @property
    def relative_error(self) -> float:
        """Leading term against the quadrature total ``I1 + I2 + I3``."""
        if self.quadrature is None or self.leading is None:
            return math.nan
        tot = self.quadrature.total
        return abs(self.leading - tot) / abs(tot)


def asymptotic_row(y: float, t: float, M: float, g) -> AsymptoticRow:
    try:
        rc = classify_stationary(y, M)
    except BoundaryValueError:
        return AsymptoticRow(y, t, M, "boundary", None, None)
    q = eval_partial_integrals_quadrature(y, t, M, g)
    try:
        lead = stationary_phase_leading(y, t, M, g)
    except DomainError:
        lead = None
    return AsymptoticRow(y, t, M, rc.region, q, lead)
