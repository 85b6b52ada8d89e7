"""Cross-checks between independent routes to the same spectrum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CavityGeometry, horwitz_params
from .operators import (
    Grid,
    assemble_coupled,
    assemble_parity,
    assemble_scaled,
    physical_to_scaled,
    scaled_optics,
)
from .spectrum import match_spectra, solve_spectrum, sort_spectrum, spectrum_values


@dataclass(frozen=True)
class ParityUnion:
    coupled: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    max_distance: float


def parity_union(grid: Grid, geom: CavityGeometry, coupled=None) -> ParityUnion:
    """Compare the coupled spectrum with the union of the two parity sectors.

    ``coupled`` may carry precomputed eigenvalues of the coupled operator.
    """
    if coupled is None:
        coupled = spectrum_values(assemble_coupled(grid, geom))
    plus = spectrum_values(assemble_parity(grid, geom, 1))
    minus = spectrum_values(assemble_parity(grid, geom, -1))
    union = sort_spectrum(np.concatenate([plus, minus]))
    d = match_spectra(coupled, union)
    return ParityUnion(coupled, plus, minus, float(d.max()))


@dataclass(frozen=True)
class Correspondence:
    physical: np.ndarray
    rescaled: np.ndarray
    max_relative_error: float
    min_cosine: float


def _subspace_cosine(g: np.ndarray, basis: np.ndarray) -> float:
    Q, _ = np.linalg.qr(basis)
    return float(np.linalg.norm(Q.conj().T @ g) / np.linalg.norm(g))


def scaled_correspondence(
    grid: Grid, geom: CavityGeometry, parity: int = 1, top: int = 5, cluster_rtol: float = 1e-8
) -> Correspondence:
    """Match the physical parity operator with the collimated one.

    Eigenvalues of the collimated operator are divided by ``sqrt(M)``.  Each
    physical mode is mapped through the half-mirror shift and the Horwitz gauge
    and compared with the collimated eigenvector of the matching eigenvalue;
    for a degenerate eigenvalue the comparison is against the whole eigenspace.
    """
    hp = horwitz_params(geom)
    _, r_s, lam = scaled_optics(geom)
    phys = solve_spectrum(assemble_parity(grid, geom, parity), geom)
    scal = solve_spectrum(assemble_scaled(grid, hp, r_s, lam, parity), geom)
    gs = scal.gammas / np.sqrt(hp.M)
    modes = np.column_stack([p.mode for p in scal.pairs])

    rel, cos = [], []
    for pair in phys.pairs[:top]:
        j = int(np.argmin(np.abs(gs - pair.gamma)))
        rel.append(abs(gs[j] - pair.gamma) / abs(pair.gamma))
        near = np.nonzero(np.abs(gs - gs[j]) <= cluster_rtol * abs(gs[j]))[0]
        g = physical_to_scaled(pair.mode, grid, geom)
        cos.append(_subspace_cosine(g, modes[:, near]))
    return Correspondence(
        physical=phys.gammas[:top],
        rescaled=gs[:top],
        max_relative_error=float(max(rel)),
        min_cosine=float(min(cos)),
    )


def unit_circle_deviation(gammas, k: int = 10) -> float:
    """Worst ``||gamma| - 1|`` among the ``k`` largest-modulus eigenvalues.

    Ranking is by modulus alone; the phase tie-break of ``sort_spectrum``
    would otherwise decide which members of a near-unimodular cluster count.
    """
    mod = np.sort(np.abs(np.asarray(gammas)))[::-1][:k]
    return float(np.max(np.abs(mod - 1.0)))
