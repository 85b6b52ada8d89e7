"""Eigenvalues and eigenmodes of the assembled round-trip operators."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import CavityError, ConvergenceError, DomainError
from .geometry import CavityGeometry, classify_stability
from .operators import CoupledOperator, Grid, OperatorMatrix, assemble_round_trip, build_operator

log = logging.getLogger(__name__)

TIE_TOL = 1e-10
PARITY_TOL = 1e-6
# clusters whose computed eigenvectors are nearly dependent are left alone
CLUSTER_COND_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenPair:
    gamma: complex
    mode: np.ndarray = field(repr=False)
    parity: int | None
    residual: float
    degeneracy: int = 1


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    pairs: list
    operator_kind: str
    grid: Grid = field(repr=False)
    geometry: CavityGeometry | None = None

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.pairs])

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, k) -> EigenPair:
        return self.pairs[k]


def sort_order(values: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Indices sorting by modulus descending; moduli within ``tol`` tie and go by phase."""
    values = np.asarray(values)
    mod = np.abs(values)
    order = np.argsort(-mod, kind="stable")
    out = []
    start = 0
    for i in range(1, len(order) + 1):
        # groups are anchored on their largest member so a group never spans more than tol
        if i == len(order) or mod[order[start]] - mod[order[i]] > tol:
            group = order[start:i]
            if len(group) > 1:
                group = group[np.argsort(np.angle(values[group]), kind="stable")]
            out.append(group)
            start = i
    return np.concatenate(out) if out else order


def sort_spectrum(values) -> np.ndarray:
    values = np.asarray(values)
    return values[sort_order(values)]


def cluster_labels(values: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Connected components of eigenvalues closer than ``tol`` to one another."""
    pts = np.column_stack([values.real, values.imag])
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    n = len(values)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def _symmetries(op) -> list:
    if isinstance(op, CoupledOperator):
        n = op.grid.n

        def exchange(V):
            return np.concatenate([V[n:], V[:n]])

        def reflect(V):
            return np.concatenate([V[:n][::-1], V[n:][::-1]])

        return [exchange, reflect]
    return [lambda V: V[::-1]]


def _adapt(Q: np.ndarray, syms: list) -> np.ndarray:
    """Rotate an orthonormal cluster basis onto joint eigenvectors of commuting involutions."""
    if not syms or Q.shape[1] < 2:
        return Q
    S = syms[0]
    H = Q.conj().T @ S(Q)
    vals, U = np.linalg.eigh(0.5 * (H + H.conj().T))
    Q = Q @ U
    parts = [Q[:, vals < 0], Q[:, vals >= 0]]
    return np.concatenate([_adapt(P, syms[1:]) for P in parts if P.shape[1]], axis=1)


def _operator_norm(A: np.ndarray, iterations: int = 30) -> float:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    s = 0.0
    for _ in range(iterations):
        y = A.conj().T @ (A @ x)
        s = np.linalg.norm(y)
        if s == 0.0:
            return 0.0
        x = y / s
    return math.sqrt(s)


def _doublet_parity(v: np.ndarray, n: int) -> int | None:
    v1, v2 = v[:n], v[n:]
    scale = np.linalg.norm(v1)
    if scale == 0.0:
        return None
    if np.linalg.norm(v2 - v1) <= PARITY_TOL * scale:
        return 1
    if np.linalg.norm(v2 + v1) <= PARITY_TOL * scale:
        return -1
    return None


def _entries(op) -> tuple[np.ndarray, str]:
    if isinstance(op, CoupledOperator):
        return op.entries, "coupled"
    if isinstance(op, OperatorMatrix):
        return op.entries, op.kind or "operator"
    raise DomainError(f"cannot solve spectrum of {type(op).__name__}")


def spectrum_values(op) -> np.ndarray:
    """Sorted eigenvalues only; cheaper than ``solve_spectrum`` by skipping vectors."""
    A, kind = _entries(op)
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{kind} operator has non-finite entries")
    try:
        w = sla.eigvals(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed for {kind} operator of size {A.shape[0]}") from exc
    return sort_spectrum(w)


def solve_spectrum(op, geometry: CavityGeometry | None = None, adapt: bool = True) -> SpectrumResult:
    """Dense non-Hermitian eigendecomposition, sorted by ``|gamma|`` descending.

    Modes are normalised to ``sum |v|^2 h = 1`` and phase-fixed so that their
    largest component is real and positive.  Eigenvalues closer than 1e-10
    form a cluster; inside a cluster the basis is re-orthonormalised and
    rotated onto eigenvectors of the operator's exact symmetries (``y -> -y``
    and, for the coupled operator, exchange of the two sub-cavities) so that
    parity labels and output are reproducible.
    """
    A, kind = _entries(op)
    grid = op.grid
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{kind} operator has non-finite entries")
    try:
        w, V = sla.eig(A, check_finite=False, overwrite_a=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed for {kind} operator of size {A.shape[0]}") from exc

    order = sort_order(w)
    w, V = w[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)

    labels = cluster_labels(w)
    counts = np.bincount(labels)
    if adapt:
        syms = _symmetries(op)
        for lab in np.nonzero(counts > 1)[0]:
            idx = np.nonzero(labels == lab)[0]
            Q, Rq = np.linalg.qr(V[:, idx])
            d = np.abs(np.diag(Rq))
            if d.min() < CLUSTER_COND_TOL * d.max():
                continue
            V[:, idx] = _adapt(Q, syms)

    # phase convention: largest-modulus component real positive
    piv = np.argmax(np.abs(V), axis=0)
    ph = V[piv, np.arange(V.shape[1])]
    V = V * (np.abs(ph) / ph)

    norm_a = _operator_norm(A)
    res = np.linalg.norm(A @ V - V * w, axis=0) / (norm_a if norm_a > 0 else 1.0)
    V = V / math.sqrt(grid.weight)

    n = grid.n
    op_parity = getattr(op, "parity", None)
    pairs = []
    for k in range(len(w)):
        v = V[:, k]
        if kind == "coupled":
            par = _doublet_parity(v, n)
        else:
            par = op_parity
        pairs.append(EigenPair(complex(w[k]), v, par, float(res[k]), int(counts[labels[k]])))
    bad = [p for p in pairs if p.residual > 1e-8]
    if bad:
        log.warning("%d eigenpairs of the %s operator exceed residual 1e-8", len(bad), kind)
    return SpectrumResult(pairs, kind, grid, geometry)


def match_spectra(a, b) -> np.ndarray:
    """Distances between optimally paired eigenvalues of two equal-size spectra."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"spectra differ in size: {a.shape} vs {b.shape}")
    cost = np.abs(a[:, None] - b[None, :])
    ri, ci = linear_sum_assignment(cost)
    return cost[ri, ci]


def decoupled_subcavity_spectrum(grid: Grid, geom: CavityGeometry, vectors: bool = True):
    """Spectrum of one hard-edged unstable sub-cavity (no transmission past the mirror).

    Returns a ``SpectrumResult`` or, with ``vectors=False``, the sorted
    eigenvalues.
    """
    if not classify_stability(geom).subcavity_unstable:
        raise DomainError(f"sub-cavity is not unstable (l={geom.l:g} >= R - r)")
    rho = assemble_round_trip(grid, geom)
    if vectors:
        result = solve_spectrum(rho, geom)
        gammas = result.gammas
    else:
        result = gammas = spectrum_values(rho)
    if np.max(np.abs(gammas)) >= 1.0:
        raise CavityError(
            f"decoupled sub-cavity eigenvalue |gamma| = {np.max(np.abs(gammas)):.6g} >= 1; "
            "discretisation is inconsistent"
        )
    return result


def resonance_wavelengths(gamma: complex, l: float, q_range) -> list:
    """Wavelengths at which ``exp(4 pi i l / lambda)`` equals the eigenvalue phase.

    Returns ``(q, lambda_q)`` pairs, ``lambda_q = 4 pi l / (arg gamma + 2 pi q)``,
    for each integer ``q`` in the inclusive range with a positive denominator.
    """
    if gamma == 0:
        raise DomainError("gamma = 0 has no phase")
    if not l > 0:
        raise DomainError(f"l must be positive, got {l}")
    q_lo, q_hi = q_range
    phi = np.angle(gamma)
    out = []
    for q in range(int(q_lo), int(q_hi) + 1):
        den = phi + 2.0 * np.pi * q
        if den > 0:
            out.append((q, 4.0 * np.pi * l / den))
    return out


@dataclass(frozen=True)
class Refinement:
    q: int
    wavelength: float
    refined_wavelength: float

    @property
    def shift(self) -> float:
        return self.refined_wavelength - self.wavelength


def refine_resonance(
    geom: CavityGeometry, grid: Grid, kind: str, index: int, q: int, parity: int = 1
) -> Refinement:
    """One fixed-point pass: re-solve at ``lambda_q`` and recompute it from the new phase."""
    def lam_for(g):
        gam = spectrum_values(build_operator(kind, grid, g, parity))[index]
        hits = resonance_wavelengths(gam, geom.l, (q, q))
        if not hits:
            raise DomainError(f"no positive resonance for q={q}")
        return hits[0][1]

    lam_q = lam_for(geom)
    return Refinement(q, lam_q, lam_for(replace(geom, lambda_=lam_q)))
