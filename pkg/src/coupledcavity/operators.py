"""Discretised propagation and scattering operators on a transverse grid.

Inside this module every transverse length is measured in units of the
central-mirror half-width ``a``; the aperture edge therefore sits at
``|y| = 1``.  Kernels use the midpoint rule with the weight ``h`` folded into
the columns, so matrix products and eigenvalues need no further weighting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateKernelError, DomainError, UndersampledGridError
from .geometry import (
    ABCDMatrix,
    CavityGeometry,
    HorwitzParams,
    abcd_half_cavity,
    horwitz_params,
)

SQRT_I = np.exp(0.25j * np.pi)
MAX_PHASE_STEP = 0.5 * np.pi
EDGE_TOL = 1e-14
APODIZATION_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class Grid:
    n: int
    half_width: float
    points: np.ndarray = field(repr=False)
    weight: float

    @property
    def inside(self) -> np.ndarray:
        """Boolean mask of samples on the central mirror, ``|y| < 1``."""
        return np.abs(self.points) < 1.0

    def reflect(self, v: np.ndarray) -> np.ndarray:
        """Apply ``y -> -y``; the midpoint grid is exactly antisymmetric."""
        return v[..., ::-1]


def _midpoints(n: int, half_width: float) -> np.ndarray:
    h = 2.0 * half_width / n
    # build the positive half and mirror it so that y[i] == -y[n-1-i] bitwise
    pos = (np.arange(n // 2) + 0.5) * h
    return np.concatenate([-pos[::-1], pos])


def make_grid(n: int, half_width: float) -> Grid:
    """Symmetric midpoint grid on ``[-W, W]`` with ``n`` samples."""
    if n % 2 or n < 16:
        raise DomainError(f"grid size must be even and >= 16, got {n}")
    if not half_width > 1.0:
        raise DomainError(f"window half-width must exceed the aperture (1), got {half_width}")
    pts = _midpoints(n, half_width)
    if np.any(np.abs(np.abs(pts) - 1.0) < EDGE_TOL):
        raise DomainError(f"grid (n={n}, W={half_width}) samples the aperture edge |y| = 1")
    return Grid(n=n, half_width=float(half_width), points=pts, weight=2.0 * half_width / n)


def default_half_width(M: float) -> float:
    return max(3.0, 1.5 * M)


def align_half_width(n: int, half_width: float) -> float:
    """Smallest window ``>= half_width`` whose cell boundaries include ``|y| = 1``.

    With the aperture edge on a cell boundary every cell is either fully
    inside or fully outside the mirror, and the spectrum converges at second
    order in ``h`` instead of jittering with the edge's sub-cell position.
    """
    k = math.floor(n / (2.0 * half_width))
    if k < 1:
        raise DomainError(f"grid n={n} has fewer than one cell per aperture half-width at W={half_width}")
    return n / (2.0 * k)


def grid_adequacy(grid: Grid, t: float, M: float) -> bool:
    """Nyquist guard for the scaled chirp ``exp(-i t (x - y/M)^2)``."""
    W, h = grid.half_width, grid.weight
    return h * 2.0 * t * W * (1.0 + 1.0 / M) < MAX_PHASE_STEP


def kernel_phase_step(grid: Grid, abcd: ABCDMatrix, lambda_scaled: float) -> float:
    """Largest adjacent-sample phase increment of the Fresnel kernel exponent."""
    W, h = grid.half_width, grid.weight
    rate = np.pi / abs(abcd.B * lambda_scaled) * 2.0 * W * (max(abs(abcd.A), abs(abcd.D)) + 1.0)
    return rate * h


@dataclass(frozen=True, eq=False)
class MaskVector:
    values: np.ndarray
    grid: Grid
    kind: str = ""

    def apply(self, entries: np.ndarray) -> np.ndarray:
        return self.values[:, None] * entries


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    grid: Grid
    quadrature_absorbed: bool = True
    kind: str = ""
    parity: int | None = None

    def __post_init__(self):
        if self.entries.shape != (self.grid.n, self.grid.n):
            raise DomainError(
                f"operator shape {self.entries.shape} does not match grid size {self.grid.n}"
            )

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.quadrature_absorbed != other.quadrature_absorbed:
            raise DomainError("cannot multiply operators with and without absorbed quadrature weights")
        if self.grid is not other.grid and self.grid.n != other.grid.n:
            raise DomainError("operators live on different grids")
        return OperatorMatrix(self.entries @ other.entries, self.grid, self.quadrature_absorbed)


@dataclass(frozen=True, eq=False)
class CoupledOperator:
    entries: np.ndarray
    grid: Grid

    @classmethod
    def from_blocks(cls, rho: np.ndarray, tau: np.ndarray, grid: Grid) -> "CoupledOperator":
        return cls(np.block([[rho, tau], [tau, rho]]), grid)

    @property
    def rho(self) -> np.ndarray:
        n = self.grid.n
        return self.entries[:n, :n]

    @property
    def tau(self) -> np.ndarray:
        n = self.grid.n
        return self.entries[:n, n:]


def taper(grid: Grid) -> np.ndarray:
    """Cosine roll-off over the outer tenth of the window."""
    W = grid.half_width
    start = (1.0 - APODIZATION_FRACTION) * W
    u = np.clip((np.abs(grid.points) - start) / (APODIZATION_FRACTION * W), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * u))


def propagator_kernel(
    grid: Grid, abcd: ABCDMatrix, lambda_scaled: float, apodize: bool = False
) -> OperatorMatrix:
    """Huygens-Fresnel kernel for a scaled ray matrix, weight ``h`` included.

    ``abcd`` must already be in units of ``a`` (see ``ABCDMatrix.scaled``).
    """
    if abcd.is_degenerate:
        raise DegenerateKernelError("B = 0: propagator kernel is singular")
    step = kernel_phase_step(grid, abcd, lambda_scaled)
    if step >= MAX_PHASE_STEP:
        raise UndersampledGridError(
            f"kernel phase step {step:.3g} rad >= pi/2 on grid n={grid.n}, W={grid.half_width}"
        )
    y = grid.points
    y2 = y * y
    b_lam = abcd.B * lambda_scaled
    # (A y'^2 + D y^2) first: bitwise symmetric in (y, y') when A == D
    quad = abcd.A * y2[None, :] + abcd.D * y2[:, None]
    phase = quad - 2.0 * np.multiply.outer(y, y)
    pref = SQRT_I / np.sqrt(complex(b_lam)) * grid.weight
    K = pref * np.exp((-1j * np.pi / b_lam) * phase)
    if apodize:
        K *= taper(grid)[None, :]
    return OperatorMatrix(K, grid, True, "propagator")


def scaled_optics(geom: CavityGeometry) -> tuple[ABCDMatrix, float, float]:
    """Half-cavity ray matrix, convex radius and wavelength in units of ``a``."""
    a = geom.a
    return abcd_half_cavity(geom.l, geom.R).scaled(a), geom.r / a, geom.lambda_ / a


def half_cavity_kernel(grid: Grid, geom: CavityGeometry, apodize: bool = False) -> OperatorMatrix:
    abcd, _, lam = scaled_optics(geom)
    return propagator_kernel(grid, abcd, lam, apodize)


def unit_phase(theta) -> np.ndarray:
    """``exp(i theta)`` nudged by at most 3 ulp per part so that ``abs() == 1`` exactly.

    About a third of raw ``exp(i theta)`` values miss unit modulus by one
    ulp, which would leave rounding noise in the pointwise scattering
    unitarity residuals.
    """
    z = np.exp(1j * np.asarray(theta, dtype=float))
    bad = np.nonzero(np.abs(z) != 1.0)[0]
    if bad.size == 0:
        return z
    c0, s0 = z.real[bad], z.imag[bad]
    done = np.zeros(bad.size, dtype=bool)
    out = z[bad]
    for k in (1, 2, 3):
        for dc in range(-k, k + 1):
            for ds in range(-k, k + 1):
                c = _nudge(c0, dc)
                s = _nudge(s0, ds)
                cand = c + 1j * s
                ok = ~done & (np.abs(cand) == 1.0)
                out[ok] = cand[ok]
                done |= ok
        if done.all():
            break
    z[bad] = out
    return z


def _nudge(x: np.ndarray, steps: int) -> np.ndarray:
    direction = np.inf if steps > 0 else -np.inf
    for _ in range(abs(steps)):
        x = np.nextafter(x, direction)
    return x


def reflection_phase(grid: Grid, r_scaled: float, lambda_scaled: float) -> MaskVector:
    if not r_scaled > 0:
        raise DomainError(f"convex radius must be positive, got {r_scaled}")
    y = grid.points
    xi = unit_phase(-2.0 * np.pi * y * y / (r_scaled * lambda_scaled))
    return MaskVector(xi, grid, "xi")


def build_T(grid: Grid) -> MaskVector:
    return MaskVector(np.where(grid.inside, 0.0, 1.0).astype(complex), grid, "T")


def build_R(grid: Grid, r_scaled: float, lambda_scaled: float) -> MaskVector:
    xi = reflection_phase(grid, r_scaled, lambda_scaled).values
    return MaskVector(np.where(grid.inside, xi, 0.0), grid, "R")


def _blocks(grid: Grid, geom: CavityGeometry, apodize: bool):
    geom.require_globally_stable()
    abcd, r_s, lam = scaled_optics(geom)
    K = propagator_kernel(grid, abcd, lam, apodize).entries
    return build_R(grid, r_s, lam), build_T(grid), K


def assemble_coupled(grid: Grid, geom: CavityGeometry, apodize: bool = False) -> CoupledOperator:
    """Block operator ``[[rho, tau], [tau, rho]]`` acting on the doublet (v1, v2)."""
    R, T, K = _blocks(grid, geom, apodize)
    return CoupledOperator.from_blocks(R.apply(K), T.apply(K), grid)


def assemble_round_trip(grid: Grid, geom: CavityGeometry, apodize: bool = False) -> OperatorMatrix:
    """``rho = diag(R) K``: one hard-edged unstable sub-cavity on its own."""
    abcd, r_s, lam = scaled_optics(geom)
    K = propagator_kernel(grid, abcd, lam, apodize).entries
    return OperatorMatrix(build_R(grid, r_s, lam).apply(K), grid, True, "decoupled")


def _check_parity(parity: int):
    if parity not in (1, -1):
        raise DomainError(f"parity must be +1 or -1, got {parity!r}")


def assemble_parity(
    grid: Grid, geom: CavityGeometry, parity: int, apodize: bool = False
) -> OperatorMatrix:
    """Symmetric (``v2 = v1``) or antisymmetric (``v2 = -v1``) sector of the coupled operator."""
    _check_parity(parity)
    R, T, K = _blocks(grid, geom, apodize)
    mask = R.values + parity * T.values
    kind = "parity_plus" if parity == 1 else "parity_minus"
    return OperatorMatrix(mask[:, None] * K, grid, True, kind, parity)


def assemble_scaled(
    grid: Grid,
    horwitz: HorwitzParams,
    r_scaled: float,
    lambda_scaled: float,
    parity: int = 1,
    apodize: bool = False,
) -> OperatorMatrix:
    """Collimated kernel ``sqrt(i t/pi) exp(-i t (x - y/M)^2)`` with the aperture mask.

    Its eigenvalues are ``sqrt(M)`` times those of ``assemble_parity`` with the
    same parity.
    """
    _check_parity(parity)
    t, M = horwitz.t, horwitz.M
    if not grid_adequacy(grid, t, M):
        raise UndersampledGridError(
            f"grid n={grid.n}, W={grid.half_width} undersamples the chirp t={t:.4g}, M={M:.4g}"
        )
    y = grid.points
    d = y[None, :] - y[:, None] / M
    C = np.sqrt(1j * t / np.pi) * grid.weight * np.exp(-1j * t * d * d)
    if apodize:
        C *= taper(grid)[None, :]
    xi = reflection_phase(grid, r_scaled, lambda_scaled).values
    mask = np.where(grid.inside, 1.0 + 0j, parity * np.conj(xi))
    return OperatorMatrix(mask[:, None] * C, grid, True, "scaled", parity)


def gauge_transform(v, grid: Grid, F: float, M: float, direction: str = "to_g") -> np.ndarray:
    """Multiply by ``exp(+-i pi F (M - 1/M) y^2 / 2)``; ``to_v`` undoes ``to_g``."""
    phase = 0.5 * np.pi * F * (M - 1.0 / M) * grid.points ** 2
    if direction == "to_g":
        return np.asarray(v) * np.exp(1j * phase)
    if direction == "to_v":
        return np.asarray(v) * np.exp(-1j * phase)
    raise DomainError(f"direction must be 'to_g' or 'to_v', got {direction!r}")


def half_mirror_shift(
    v, grid: Grid, r_scaled: float, lambda_scaled: float, direction: str = "to_symmetric"
) -> np.ndarray:
    """Move the reference plane by half the convex-mirror phase.

    Modes of ``assemble_parity`` are referenced just after the convex mirror,
    where the round-trip matrix is not symmetric.  Multiplying by ``xi^(-1/2)``
    moves them to the plane where ``A = D = m``, which is the plane the
    Horwitz gauge assumes.
    """
    phase = np.pi * grid.points ** 2 / (r_scaled * lambda_scaled)
    if direction == "to_symmetric":
        return np.asarray(v) * np.exp(1j * phase)
    if direction == "to_mirror":
        return np.asarray(v) * np.exp(-1j * phase)
    raise DomainError(f"direction must be 'to_symmetric' or 'to_mirror', got {direction!r}")


def physical_to_scaled(v, grid: Grid, geom: CavityGeometry) -> np.ndarray:
    """Map an eigenvector of ``assemble_parity`` onto the matching one of ``assemble_scaled``."""
    hp = horwitz_params(geom)
    _, r_s, lam = scaled_optics(geom)
    return gauge_transform(half_mirror_shift(v, grid, r_s, lam), grid, hp.F, hp.M, "to_g")


@dataclass(frozen=True)
class UnitarityReport:
    mask_sum: float
    mask_cross: float
    kernel_spectral: float
    kernel_beam: float
    norm_conservation: float


def _spectral_defect(K: np.ndarray, rng: np.random.Generator, iterations: int) -> float:
    """Power-iteration estimate of ``||K^H K - I||_2``."""
    n = K.shape[1]
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iterations):
        y = K.conj().T @ (K @ x) - x
        est = np.linalg.norm(y)
        if est == 0.0:
            return 0.0
        x = y / est
    return float(est)


def _beam_defect(K: np.ndarray, grid: Grid, abcd: ABCDMatrix, lambda_scaled: float) -> float:
    """Energy defect of the kernel on Gaussian beams sized to fit the window.

    The waist Rayleigh range is chosen to minimise the larger of input and
    output beam radii, then perturbed by factors of 0.7 and 1.4.
    """
    A, B = abcd.A, abcd.B
    z = np.abs(B) * np.logspace(-2, 2, 401)
    w_in2 = lambda_scaled * z / np.pi
    w_out2 = lambda_scaled * (A * A * z * z + B * B) / (np.pi * z)
    z0 = z[np.argmin(np.maximum(w_in2, w_out2))]
    h = grid.weight
    worst = 0.0
    for f in (0.7, 1.0, 1.4):
        w0sq = lambda_scaled * z0 * f / np.pi
        u = np.exp(-grid.points ** 2 / w0sq)
        e_in = np.sum(np.abs(u) ** 2) * h
        e_out = np.sum(np.abs(K @ u) ** 2) * h
        worst = max(worst, abs(e_out / e_in - 1.0))
    return worst


def check_unitarity(
    grid: Grid,
    geom: CavityGeometry,
    trials: int = 10,
    seed: int = 0,
    power_iterations: int = 60,
) -> UnitarityReport:
    """Residuals of the scattering and propagation unitarity conditions.

    ``mask_sum`` and ``mask_cross`` are the pointwise complementarity and
    orthogonality of the transmission and reflection masks; ``norm_conservation``
    pushes random unit-norm doublets through the scattering matrix.  Both are
    exact at the discrete level.  ``kernel_spectral`` is the full operator-norm
    defect of the truncated kernel, which is close to 1 whenever the window
    clips part of the propagated field; ``kernel_beam`` measures energy
    conservation on Gaussian beams that stay inside the window.
    """
    abcd, r_s, lam = scaled_optics(geom)
    T = build_T(grid).values
    R = build_R(grid, r_s, lam).values
    mask_sum = float(np.max(np.abs(np.abs(T) ** 2 + np.abs(R) ** 2 - 1.0)))
    mask_cross = float(np.max(np.abs(T * np.conj(R) + np.conj(T) * R)))

    rng = np.random.default_rng(seed)
    h = grid.weight
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal((2, grid.n)) + 1j * rng.standard_normal((2, grid.n))
        u /= math.sqrt(np.sum(np.abs(u) ** 2) * h)
        v1 = T * u[0] + R * u[1]
        v2 = R * u[0] + T * u[1]
        e_in = np.sum(np.abs(u) ** 2) * h
        e_out = (np.sum(np.abs(v1) ** 2) + np.sum(np.abs(v2) ** 2)) * h
        worst = max(worst, abs(e_in - e_out))

    K = propagator_kernel(grid, abcd, lam).entries
    return UnitarityReport(
        mask_sum=mask_sum,
        mask_cross=mask_cross,
        kernel_spectral=_spectral_defect(K, rng, power_iterations),
        kernel_beam=_beam_defect(K, grid, abcd, lam),
        norm_conservation=float(worst),
    )


OPERATOR_KINDS = ("coupled", "parity_plus", "parity_minus", "decoupled", "scaled")


def build_operator(
    kind: str, grid: Grid, geom: CavityGeometry, parity: int = 1, apodize: bool = False
):
    """Assemble the operator named by ``kind`` for a geometry."""
    if kind == "coupled":
        return assemble_coupled(grid, geom, apodize)
    if kind == "parity_plus":
        return assemble_parity(grid, geom, 1, apodize)
    if kind == "parity_minus":
        return assemble_parity(grid, geom, -1, apodize)
    if kind == "decoupled":
        return assemble_round_trip(grid, geom, apodize)
    if kind == "scaled":
        _, r_s, lam = scaled_optics(geom)
        return assemble_scaled(grid, horwitz_params(geom), r_s, lam, parity, apodize)
    raise DomainError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
