import math

import numpy as np
import pytest

from coupledcavity.errors import DomainError
from coupledcavity.geometry import CavityGeometry, horwitz_params
from coupledcavity.operators import (
    Grid,
    OperatorMatrix,
    align_half_width,
    assemble_coupled,
    assemble_parity,
    assemble_round_trip,
    make_grid,
)
from coupledcavity.spectrum import (
    cluster_labels,
    decoupled_subcavity_spectrum,
    match_spectra,
    refine_resonance,
    resonance_wavelengths,
    solve_spectrum,
    sort_spectrum,
    spectrum_values,
    TIE_TOL,
)


def toy(matrix):
    A = np.asarray(matrix, dtype=complex)
    n = A.shape[0]
    grid = Grid(n=n, half_width=1.0, points=np.linspace(-1, 1, n), weight=1.0)
    return OperatorMatrix(A, grid, True, "toy")


def test_identity():
    res = solve_spectrum(toy(np.eye(4)))
    assert np.all(res.gammas == 1.0)
    V = np.column_stack([p.mode for p in res.pairs])
    assert np.allclose(V.conj().T @ V, np.eye(4), atol=1e-14)
    assert max(p.residual for p in res.pairs) < 1e-15
    assert all(p.degeneracy == 4 for p in res.pairs)


def test_diagonal_order():
    res = solve_spectrum(toy(np.diag([0.5, 2j, 1.0])))
    assert np.allclose(res.gammas, [2j, 1.0, 0.5])


def test_exchange_toy():
    k = 0.7
    res = solve_spectrum(toy([[0, k], [k, 0]]))
    assert np.allclose(res.gammas, [k, -k])
    s = 1 / math.sqrt(2)
    assert np.allclose(res[0].mode, [s, s])
    assert np.allclose(res[1].mode, [s, -s])


def test_sort_ties_broken_by_phase():
    vals = np.array([1j, -1.0, 1.0, 0.5, -1j])
    out = sort_spectrum(vals)
    assert np.array_equal(out, [-1j, 1.0, 1j, -1.0, 0.5])


def test_cluster_labels():
    vals = np.array([1.0, 1.0 + 1e-12, 0.5, 0.5 + 1e-3j])
    lab = cluster_labels(vals)
    assert lab[0] == lab[1]
    assert len(set(lab)) == 3


def test_match_spectra():
    a = np.array([1.0, 2.0, 3.0j])
    b = np.array([3.0j + 1e-9, 1.0, 2.0])
    assert match_spectra(a, b).max() == pytest.approx(1e-9)
    with pytest.raises(DomainError):
        match_spectra(a, b[:2])


def test_non_finite_rejected():
    with pytest.raises(DomainError):
        solve_spectrum(toy([[np.nan, 0], [0, 1]]))


def test_resonance_wavelengths():
    ((q, lam),) = resonance_wavelengths(1.0, 0.5, (2_000_000, 2_000_000))
    assert q == 2_000_000
    assert lam == pytest.approx(0.5e-6, rel=1e-14)
    lo = dict(resonance_wavelengths(1.0, 0.5, (5, 6)))
    mid = dict(resonance_wavelengths(-1.0, 0.5, (5, 6)))
    # arg = pi: each resonance sits between consecutive arg = 0 ones
    assert lo[6] < mid[5] < lo[5]
    assert resonance_wavelengths(1.0, 0.5, (-3, 0)) == []
    with pytest.raises(DomainError):
        resonance_wavelengths(0, 0.5, (1, 2))


def test_decoupled_inside_unit_disc(g20):
    grid = make_grid(512, 3.0)
    g = decoupled_subcavity_spectrum(grid, g20, vectors=False)
    assert np.max(np.abs(g)) < 1.0


def test_decoupled_converges_with_n(g20):
    a = spectrum_values(assemble_round_trip(make_grid(512, align_half_width(512, 3.0)), g20))[:3]
    b = spectrum_values(assemble_round_trip(make_grid(1024, align_half_width(1024, 3.0)), g20))[:3]
    assert np.max(np.abs(np.abs(a) - np.abs(b))) < 1e-3


def test_decoupled_requires_unstable():
    g = CavityGeometry(1.0, 0.2, 0.9, 1e-3, 5e-7)
    with pytest.raises(DomainError):
        decoupled_subcavity_spectrum(make_grid(64, 3.0), g)


def test_parity_modes_normalised_and_even(g20):
    grid = make_grid(512, 3.0)
    res = solve_spectrum(assemble_parity(grid, g20, 1), g20)
    for p in res.pairs[:10]:
        inten = np.abs(p.mode) ** 2
        assert np.sum(inten) * grid.weight == pytest.approx(1.0, abs=1e-10)
        assert np.max(np.abs(inten - inten[::-1])) < 1e-6 * inten.max()
        assert p.parity == 1
        assert p.residual < 1e-10


def test_coupled_modes_have_parity(g20):
    grid = make_grid(256, 3.0)
    res = solve_spectrum(assemble_coupled(grid, g20), g20)
    n = grid.n
    for p in res.pairs[:10]:
        assert p.parity in (1, -1)
        v1, v2 = p.mode[:n], p.mode[n:]
        assert np.allclose(v2, p.parity * v1, atol=1e-6 * np.abs(v1).max())
        assert np.sum(np.abs(p.mode) ** 2) * grid.weight == pytest.approx(1.0, abs=1e-10)
    mod = np.abs(res.gammas)
    assert np.all(np.diff(mod) <= TIE_TOL)


def test_coupled_eigenvalues_unimodular_at_top(g20):
    grid = make_grid(256, 3.0)
    g = spectrum_values(assemble_coupled(grid, g20))
    assert np.max(np.abs(np.abs(g[:10]) - 1)) < 0.05


def test_refine_resonance(g20):
    grid = make_grid(256, 3.0)
    q = int(round(2 * g20.l / g20.lambda_))
    ref = refine_resonance(g20, grid, "decoupled", 0, q)
    assert ref.q == q
    assert abs(ref.wavelength - g20.lambda_) / g20.lambda_ < 1e-5
    assert math.isfinite(ref.shift)
    assert abs(ref.shift) < 1e-3 * ref.wavelength


def test_m_half_scale(g20):
    # the dominant decoupled eigenvalue sits near the geometric-optics loss
    grid = make_grid(1024, 3.0)
    g = spectrum_values(assemble_round_trip(grid, g20))
    M = horwitz_params(g20).M
    assert abs(abs(g[0]) - M ** -0.5) / M ** -0.5 < 0.25
