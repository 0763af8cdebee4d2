import numpy as np
import pytest

from weaklab.checks import (
    check_algebra,
    check_cutoff_convergence,
    check_double_commutator_bounded,
    check_mourre,
    check_overlap,
    check_prop1,
    check_prop2,
    check_prop2bis,
    check_pull_through,
    check_relative_bound,
    overlap_trend,
    pull_through_identity_deviation,
    random_state,
)
from weaklab.errors import KernelRegularityError
from weaklab.fock import build_basis, build_mode_table
from weaklab.model import PhysicalParams, sharp_cutoff_kernel, smooth_gaussian_kernel

PARAMS = PhysicalParams(m1=1.0, m4=2.0, g=0.05)


def make_basis(n_max=3, groups=None):
    nodes = {
        s: [((0.0, 0.0, 0.4), 0.5), ((0.0, 0.0, 0.8), 0.5)] for s in (1, 2, 3, 4)
    }
    spins = {1: [0.5], 2: [1.0], 3: [1.0], 4: [0.5]}
    return build_basis(build_mode_table(nodes, spins=spins, groups=groups), n_max)


def test_algebra_passes_default_grading():
    for result in check_algebra(make_basis(3)):
        assert result.passed, result.name
        assert result.lhs <= 1e-12


def test_algebra_negative_control_broken_grading():
    # splitting species 2 and 3 into separate groups makes them commute,
    # which contradicts the required mixed anticommutation relations
    broken = {1: "A", 2: "B", 3: "D", 4: "C"}
    results = {r.name: r for r in check_algebra(make_basis(3, groups=broken))}
    assert not results["species23-anticommutation"].passed


def test_compression_soundness_norm_bounds():
    # the same bound checks pass at two truncation depths
    for n_max in (3, 4):
        basis = make_basis(n_max)
        k = smooth_gaussian_kernel(basis.table, 1.0)
        assert check_prop2(basis, k, trials=10, seed=3).passed
        assert check_prop2bis(basis, trials=10, seed=3).passed
        assert check_relative_bound(basis, PARAMS, k, trials=10, seed=3).passed


def test_prop1_truncation_warns():
    basis = make_basis(2)
    with pytest.warns(UserWarning):
        result = check_prop1(basis, trials=3, seed=0)
    assert result.passed


def test_pull_through_identity_any_vector():
    basis = make_basis(3)
    rng = np.random.default_rng(7)
    for _ in range(5):
        phi = random_state(basis.dim, rng)
        assert pull_through_identity_deviation(basis, phi) < 1e-12


def test_pull_through_g_zero_vacuum():
    basis = make_basis(3)
    k = smooth_gaussian_kernel(basis.table, 1.0)
    r = check_pull_through(basis, PARAMS, k, g=0.0, sigma=0.0)
    assert r.passed
    assert r.context["ratio_j2"] == 0.0


def test_overlap_and_trend():
    basis = make_basis(3)
    k = smooth_gaussian_kernel(basis.table, 1.0)
    r = check_overlap(basis, PARAMS, k, g=0.05, sigma=0.0, lam=0.5)
    assert r.passed
    assert 0.0 <= r.context["overlap"] <= 1.0 + 1e-12
    t = overlap_trend(basis, PARAMS, k, (0.2, 0.1, 0.05), 0.0, 0.5)
    assert t.passed
    assert t.context["fitted_c"] >= 0.0


def test_cutoff_convergence():
    basis = make_basis(3)
    k = smooth_gaussian_kernel(basis.table, 1.0)
    r = check_cutoff_convergence(
        basis, PARAMS, k, g=0.05, sigma_list=(0.9, 0.5, 0.3), trials=5
    )
    assert r.passed


def test_mourre_rejects_sharp():
    basis = make_basis(3)
    sharp = sharp_cutoff_kernel(basis.table, 1.0)
    with pytest.raises(KernelRegularityError):
        check_mourre(basis, PARAMS, sharp, (0.05,), ((2.2, 2.3),))


def test_double_commutator_requires_evaluator():
    basis = make_basis(2)
    sharp = sharp_cutoff_kernel(basis.table, 1.0)
    with pytest.raises(KernelRegularityError):
        check_double_commutator_bounded(basis, PARAMS, sharp)
    smooth = smooth_gaussian_kernel(basis.table, 1.0)
    r = check_double_commutator_bounded(basis, PARAMS, smooth)
    assert r.passed
    assert np.isfinite(r.context["scaling_derivative_l2"])


def test_check_result_as_dict():
    basis = make_basis(2)
    r = check_algebra(basis)[0]
    d = r.as_dict()
    assert d["name"] == r.name
    assert set(d) == {"name", "passed", "lhs", "rhs", "margin", "context"}
