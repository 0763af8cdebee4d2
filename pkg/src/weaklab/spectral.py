"""Eigensolvers, spectral projections, thresholds, and commutator bounds.

The dilation commutators are never built from a discretized generator; they
use the closed diagonal forms for the free part and a kernel substitution for
the interaction part.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np
from scipy.sparse import csr_matrix, issparse
from scipy.sparse.linalg import eigsh

from .errors import (
    ConfigurationError,
    KernelRegularityError,
    SolverError,
    ThresholdCollisionError,
)
from .fock import FockBasis, _diag_csr, conserved_charges
from .model import (
    Kernel,
    PhysicalParams,
    assemble_HI,
    mode_energy,
)

DENSE_CUTOFF = 400  # below this, just diagonalize densely
WINDOW_DENSE_CAP = 4096


@dataclass(frozen=True)
class ThresholdSet:
    """Energies k*m1 + l*m4 up to e_max, where new channels open."""

    values: tuple[float, ...]
    e_max: float

    def dist(self, x: float) -> float:
        return min(abs(x - s) for s in self.values)

    def dist_interval(self, a: float, b: float) -> float:
        """min over s in S, x in [a,b] of |x - s|."""
        best = float("inf")
        for s in self.values:
            if a <= s <= b:
                return 0.0
            best = min(best, abs(a - s), abs(b - s))
        return best


def thresholds(params: PhysicalParams, e_max: float) -> ThresholdSet:
    if e_max < 0:
        raise ConfigurationError("e_max must be nonnegative")
    vals = set()
    k = 0
    while k * params.m1 <= e_max + 1e-12:
        l = 0
        while k * params.m1 + l * params.m4 <= e_max + 1e-12:
            vals.add(round(k * params.m1 + l * params.m4, 12))
            l += 1
        k += 1
    return ThresholdSet(tuple(sorted(vals)), e_max)


@dataclass
class SpectralReport:
    energy: float
    vector: np.ndarray
    residual: float
    iterations: int


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k]) if v[k] != 0 else 1.0
    return v / phase


def ground_state(
    H: csr_matrix, tol: float = 1e-10, seed: int = 0, maxiter: int | None = None
) -> SpectralReport:
    """Lowest eigenpair of a Hermitian sparse operator, seeded and deterministic."""
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    n = H.shape[0]
    if issparse(H):
        H = csr_matrix(H)
        H.eliminate_zeros()
        if _is_diagonal(H):
            diag = H.diagonal().real
            i = int(np.argmin(diag))
            vec = np.zeros(n, dtype=complex)
            vec[i] = 1.0
            return SpectralReport(float(diag[i]), vec, 0.0, 0)
    if n <= DENSE_CUTOFF:
        w, v = np.linalg.eigh(H.toarray() if issparse(H) else H)
        vec = _fix_phase(v[:, 0])
        energy = float(w[0])
        iterations = 0
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        v0 /= np.linalg.norm(v0)
        # shift-invert below a Gershgorin lower bound: targets the smallest
        # algebraic eigenvalue even when an exactly decoupled eigenvector
        # would be skipped by a plain smallest-algebraic Lanczos run
        H = csr_matrix(H)
        diag = H.diagonal().real
        off = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(H.diagonal())
        lower = float(np.min(diag - off))
        try:
            w, v = eigsh(
                H, k=1, sigma=lower - 1.0, which="LM", v0=v0, tol=tol, maxiter=maxiter
            )
        except Exception as exc:  # ArpackNoConvergence and friends
            best = getattr(exc, "eigenvalues", None)
            raise SolverError(
                f"ground-state iteration failed: {exc}",
                best_residual=float("nan") if best is None else float("inf"),
            ) from exc
        energy = float(w[0])
        vec = _fix_phase(v[:, 0])
        iterations = -1  # ARPACK does not expose its count
    vec = vec / np.linalg.norm(vec)
    residual = float(np.linalg.norm(H @ vec - energy * vec))
    if residual > max(tol * 100, 1e-8) * max(1.0, abs(energy)):
        raise SolverError(
            f"residual {residual:.3e} above tolerance", best_residual=residual
        )
    return SpectralReport(energy, vec, residual, iterations)


def sector_ground_state(
    H: csr_matrix,
    basis: FockBasis,
    charges: tuple[int, int, int],
    tol: float = 1e-10,
    seed: int = 0,
) -> tuple[SpectralReport, np.ndarray]:
    """Ground state of H restricted to one conserved-charge sector.

    The interaction conserves (n1+n4, n2+n4, n3+n4); the sector (1,1,1)
    holds the single-heavy-particle decay problem.  Returns the report with
    the vector embedded in the full basis, plus the sector index array.
    """
    q = conserved_charges(basis)
    idx = np.flatnonzero(np.all(q == np.array(charges), axis=1))
    if idx.size == 0:
        raise ConfigurationError(f"charge sector {charges} is empty")
    sub = csr_matrix(csr_matrix(H)[idx][:, idx])
    rep = ground_state(sub, tol=tol, seed=seed)
    full = np.zeros(H.shape[0], dtype=rep.vector.dtype)
    full[idx] = rep.vector
    residual = float(np.linalg.norm(H @ full - rep.energy * full))
    return SpectralReport(rep.energy, full, residual, rep.iterations), idx


def projection_P_lambda(
    basis: FockBasis, params: PhysicalParams, lam: float
) -> csr_matrix:
    """Projector onto states whose species-1 plus species-4 free energy <= lam."""
    if not 0 < lam < params.m1:
        raise ConfigurationError(f"lambda must lie in (0, m1), got {lam}")
    mask14 = basis.table.species_mask(1) | basis.table.species_mask(4)
    energies = np.array([mode_energy(m, params) for m in basis.table.modes])
    diag = np.empty(basis.dim)
    for i, state in enumerate(basis.states):
        e, s = 0.0, state & mask14
        while s:
            k = (s & -s).bit_length() - 1
            e += energies[k]
            s &= s - 1
        diag[i] = 1.0 if e <= lam else 0.0
    return _diag_csr(diag)


def projection_neutrino_vacuum(basis: FockBasis) -> csr_matrix:
    """Projector onto states without species-2 or species-3 occupation."""
    mask23 = basis.table.species_mask(2) | basis.table.species_mask(3)
    diag = np.array(
        [1.0 if not (s & mask23) else 0.0 for s in basis.states]
    )
    return _diag_csr(diag)


def _dilation_symbol(species: int, p_abs: float, params: PhysicalParams) -> float:
    if species in (2, 3):
        return p_abs
    m = params.m1 if species == 1 else params.m4
    return p_abs**2 / sqrt(p_abs**2 + m**2)


def _double_dilation_symbol(species: int, p_abs: float, params: PhysicalParams) -> float:
    if species in (2, 3):
        return p_abs
    m = params.m1 if species == 1 else params.m4
    return p_abs**2 * m**2 / (p_abs**2 + m**2) ** 1.5


def _diagonal_from_symbol(basis: FockBasis, symbol) -> csr_matrix:
    per_mode = np.array([symbol(m) for m in basis.table.modes])
    diag = np.empty(basis.dim)
    for i, state in enumerate(basis.states):
        v, s = 0.0, state
        while s:
            k = (s & -s).bit_length() - 1
            v += per_mode[k]
            s &= s - 1
        diag[i] = v
    return _diag_csr(diag)


def commutator_A_H0(basis: FockBasis, params: PhysicalParams) -> csr_matrix:
    """Closed-form dilation commutator with the free part: diagonal.

    Occupied modes contribute p^2/sqrt(p^2+m^2) on the massive branches and
    |p| on the massless ones.
    """
    return _diagonal_from_symbol(
        basis, lambda m: _dilation_symbol(m.species, m.p_abs, params)
    )


def double_commutator_A_A_H0(basis: FockBasis, params: PhysicalParams) -> csr_matrix:
    """Closed-form double dilation commutator with the free part: diagonal."""
    return _diagonal_from_symbol(
        basis, lambda m: _double_dilation_symbol(m.species, m.p_abs, params)
    )


def dilation_kernel(kernel: Kernel) -> Kernel:
    """Kernel of the dilation commutator with the interaction."""
    if not kernel.is_smooth():
        raise KernelRegularityError(
            f"kernel {kernel.label!r} has no dilation derivative; "
            "Mourre operations need a smooth kernel"
        )
    return Kernel(
        kernel.table, dict(kernel.dilation_channels), label=f"dilation({kernel.label})"
    )


def commutator_A_HI(basis: FockBasis, a_kernel: Kernel) -> csr_matrix:
    """Interaction part of the dilation commutator: same assembly as H_I."""
    return assemble_HI(basis, a_kernel)


def commutator_A_H(
    basis: FockBasis, params: PhysicalParams, kernel: Kernel
) -> csr_matrix:
    """Full dilation commutator [A, H0] + g [A, H_I] from closed forms."""
    return csr_matrix(
        commutator_A_H0(basis, params)
        + params.g * commutator_A_HI(basis, dilation_kernel(kernel))
    )


def _is_diagonal(op: csr_matrix) -> bool:
    coo = op.tocoo()
    return bool(np.all(coo.row == coo.col))


def _window_vectors(H: csr_matrix, a: float, b: float) -> np.ndarray:
    """Orthonormal columns spanning the [a, b] eigenspace of Hermitian H."""
    n = H.shape[0]
    if _is_diagonal(H):
        diag = H.diagonal().real
        idx = np.flatnonzero((diag >= a) & (diag <= b))
        V = np.zeros((n, idx.size))
        V[idx, np.arange(idx.size)] = 1.0
        return V
    if n <= WINDOW_DENSE_CAP:
        w, v = np.linalg.eigh(H.toarray())
        sel = (w >= a) & (w <= b)
        return v[:, sel]
    # shift-invert around the window center, widening k until the window
    # is bracketed on both sides or the spectrum is exhausted
    center = 0.5 * (a + b)
    k = min(64, n - 2)
    while True:
        w, v = eigsh(H, k=k, sigma=center, which="LM")
        covered = (w.min() < a or k >= n - 2) and (w.max() > b or k >= n - 2)
        if covered:
            sel = (w >= a) & (w <= b)
            return v[:, sel]
        k = min(2 * k, n - 2)


def spectral_window(
    H: csr_matrix, interval: tuple[float, float]
) -> tuple[csr_matrix, int]:
    """Spectral projector of Hermitian H onto eigenvalues in [a, b]."""
    a, b = interval
    if not a < b:
        raise ConfigurationError(f"empty interval {interval}")
    V = _window_vectors(H, a, b)
    dim = V.shape[1]
    if dim == 0:
        return csr_matrix(H.shape, dtype=complex), 0
    return csr_matrix(V @ V.conj().T), dim


@dataclass
class MourreRecord:
    interval: tuple[float, float]
    beta: float
    bottom: float  # +inf flags an empty window
    dim_window: int


def mourre_bottom(
    H_ref: csr_matrix,
    commutator: csr_matrix,
    interval: tuple[float, float],
    S: ThresholdSet,
) -> MourreRecord:
    """Bottom eigenvalue of the window-compressed commutator.

    H_ref supplies the spectral window (free or interacting Hamiltonian);
    the commutator is compressed to the window range and its smallest
    eigenvalue recorded together with beta = dist(interval, S).
    """
    a, b = interval
    if not a < b:
        raise ConfigurationError(f"empty interval {interval}")
    beta = S.dist_interval(a, b)
    if beta == 0.0:
        raise ThresholdCollisionError(
            f"window {interval} intersects the threshold set"
        )
    V = _window_vectors(H_ref, a, b)
    dim = V.shape[1]
    if dim == 0:
        return MourreRecord(interval, beta, float("inf"), 0)
    compressed = V.conj().T @ (commutator @ V)
    bottom = float(np.linalg.eigvalsh(compressed)[0])
    return MourreRecord(interval, beta, bottom, dim)
