import numpy as np
import pytest

from weaklab.errors import (
    ConfigurationError,
    KernelRegularityError,
    ThresholdCollisionError,
)
from weaklab.fock import build_basis, build_mode_table
from weaklab.model import (
    PhysicalParams,
    assemble_H,
    assemble_H0,
    mode_energy,
    sharp_cutoff_kernel,
    smooth_gaussian_kernel,
    state_energies,
)
from weaklab.spectral import (
    commutator_A_H,
    commutator_A_H0,
    dilation_kernel,
    double_commutator_A_A_H0,
    ground_state,
    mourre_bottom,
    projection_neutrino_vacuum,
    projection_P_lambda,
    sector_ground_state,
    spectral_window,
    thresholds,
)

PARAMS = PhysicalParams(m1=1.0, m4=2.0, g=0.05)


def make_basis(n_max=3):
    nodes = {
        s: [((0.0, 0.0, 0.4), 0.5), ((0.0, 0.0, 0.8), 0.5)] for s in (1, 2, 3, 4)
    }
    spins = {1: [0.5], 2: [1.0], 3: [1.0], 4: [0.5]}
    return build_basis(build_mode_table(nodes, spins=spins), n_max)


def test_thresholds_enumeration():
    s = thresholds(PARAMS, 5.0)
    assert s.values == (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    assert s.dist(2.4) == pytest.approx(0.4)
    assert s.dist_interval(2.2, 2.3) == pytest.approx(0.2)
    assert s.dist_interval(1.9, 2.1) == 0.0
    with pytest.raises(ConfigurationError):
        thresholds(PARAMS, -1.0)


def test_ground_state_dense_vs_iterative():
    basis = make_basis(3)  # dim 697 > dense cutoff
    k = smooth_gaussian_kernel(basis.table, 1.0)
    h = assemble_H(basis, PARAMS, k)
    rep = ground_state(h, seed=0)
    dense = np.linalg.eigvalsh(h.toarray())[0]
    assert abs(rep.energy - dense) < 1e-8
    assert rep.residual < 1e-8


def test_ground_state_g_zero_is_vacuum():
    basis = make_basis(2)
    h = assemble_H0(basis, PARAMS)
    rep = ground_state(h)
    assert rep.energy == 0.0
    assert abs(abs(rep.vector[0]) - 1.0) < 1e-14


def test_sector_ground_state_stays_in_sector():
    basis = make_basis(3)
    k = smooth_gaussian_kernel(basis.table, 1.0)
    h = assemble_H(basis, PARAMS, k)
    rep, idx = sector_ground_state(h, basis, (1, 1, 1))
    outside = np.ones(basis.dim, dtype=bool)
    outside[idx] = False
    assert np.linalg.norm(rep.vector[outside]) == 0.0
    assert rep.energy > 0  # one heavy particle costs at least m1-ish energy
    with pytest.raises(ConfigurationError):
        sector_ground_state(h, basis, (9, 9, 9))


def test_projections():
    basis = make_basis(2)
    with pytest.raises(ConfigurationError):
        projection_P_lambda(basis, PARAMS, 1.5)  # lambda >= m1
    p = projection_P_lambda(basis, PARAMS, 0.5).diagonal()
    nv = projection_neutrino_vacuum(basis).diagonal()
    # vacuum is in both
    assert p[0] == 1.0 and nv[0] == 1.0
    # a one-muon state fails P(lambda), passes the neutrino vacuum
    table = basis.table
    k4 = table.sector_range(4, 1).start
    i = basis.index_of[1 << k4]
    assert p[i] == 0.0 and nv[i] == 1.0
    # a one-neutrino state passes P(lambda), fails the neutrino vacuum
    k2 = table.sector_range(2, 1).start
    j = basis.index_of[1 << k2]
    assert p[j] == 1.0 and nv[j] == 0.0


def test_commutator_symbols():
    basis = make_basis(2)
    c = commutator_A_H0(basis, PARAMS).diagonal().real
    d = double_commutator_A_A_H0(basis, PARAMS).diagonal().real
    table = basis.table
    # one-particle states carry the per-mode symbol exactly
    for k, mode in enumerate(table.modes):
        i = basis.index_of[1 << k]
        p = mode.p_abs
        if mode.species in (2, 3):
            assert c[i] == pytest.approx(p)
            assert d[i] == pytest.approx(p)
        else:
            m = PARAMS.m1 if mode.species == 1 else PARAMS.m4
            assert c[i] == pytest.approx(p**2 / np.hypot(p, m))
            assert d[i] == pytest.approx(p**2 * m**2 / np.hypot(p, m) ** 3)
        # double commutator dominated by the dispersion
        assert d[i] <= mode_energy(mode, PARAMS) + 1e-12


def test_dilation_kernel_rejects_sharp():
    basis = make_basis(2)
    sharp = sharp_cutoff_kernel(basis.table, 1.0)
    with pytest.raises(KernelRegularityError):
        dilation_kernel(sharp)
    smooth = smooth_gaussian_kernel(basis.table, 1.0)
    a = dilation_kernel(smooth)
    assert set(a.channels) == set(smooth.channels)


def test_commutator_A_H_hermitian():
    basis = make_basis(3)
    smooth = smooth_gaussian_kernel(basis.table, 1.0)
    c = commutator_A_H(basis, PARAMS, smooth)
    assert abs(c - c.conj().T).max() < 1e-12


def test_spectral_window_diagonal_shortcut():
    basis = make_basis(2)
    h0 = assemble_H0(basis, PARAMS)
    e = state_energies(basis, PARAMS)
    proj, dim = spectral_window(h0, (0.3, 0.9))
    assert dim == int(np.sum((e >= 0.3) & (e <= 0.9)))
    # idempotent projector
    assert abs(proj @ proj - proj).max() < 1e-12
    # empty window is not an error
    _, dim0 = spectral_window(h0, (1e6, 1e6 + 1))
    assert dim0 == 0
    with pytest.raises(ConfigurationError):
        spectral_window(h0, (1.0, 0.5))


def test_mourre_bottom_free_and_collision():
    basis = make_basis(3)
    h0 = assemble_H0(basis, PARAMS)
    c0 = commutator_A_H0(basis, PARAMS)
    s = thresholds(PARAMS, 10.0)
    rec = mourre_bottom(h0, c0, (2.2, 2.6), s)
    assert rec.beta == pytest.approx(0.2)
    assert rec.dim_window > 0
    assert rec.bottom >= rec.beta - 1e-10
    with pytest.raises(ThresholdCollisionError):
        mourre_bottom(h0, c0, (1.9, 2.1), s)
