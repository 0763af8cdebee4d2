"""Truncated fermionic Fock spaces over eight graded sectors.

The single-particle label set is discretized into a flat list of modes,
ordered sector by sector: species 1 particles, species 1 antiparticles,
species 2 particles, ... species 4 antiparticles.  Basis states are bit
patterns over that list.  Ladder operators carry Jordan-Wigner sign strings
that are internal to three grading groups: species 1 alone, species 2 and 3
together, species 4 alone.  Operators in different groups commute; operators
inside a group anticommute.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, sqrt
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .errors import ConfigurationError, InfraredGridError, ResourceError

SPECIES = (1, 2, 3, 4)
CHARGES = (1, -1)  # particle / antiparticle
SECTOR_ORDER = tuple((s, c) for s in SPECIES for c in CHARGES)

# species 1 and 4 carry spin projections, species 2 and 3 carry helicities
SPIN_DOMAIN = {1: (-0.5, 0.5), 2: (-1.0, 1.0), 3: (-1.0, 1.0), 4: (-0.5, 0.5)}

# Grading groups: sign strings live inside a group, ops across groups commute.
DEFAULT_GROUPS: Mapping[int, str] = {1: "A", 2: "B", 3: "B", 4: "C"}


@dataclass(frozen=True)
class Mode:
    """One discretized single-particle state."""

    species: int
    charge: int
    momentum: tuple[float, float, float]
    spin: float
    weight: float

    @property
    def p_abs(self) -> float:
        return sqrt(sum(c * c for c in self.momentum))


@dataclass(frozen=True)
class ModeTable:
    """Global ordered mode list with sector bookkeeping.

    ``groups`` maps species to a grading-group tag; overriding the default
    map is only useful for negative-control experiments.
    """

    modes: tuple[Mode, ...]
    sector_offsets: tuple[int, ...]  # start index of each sector, in SECTOR_ORDER
    groups: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_GROUPS))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def sector_range(self, species: int, charge: int) -> range:
        i = SECTOR_ORDER.index((species, charge))
        start = self.sector_offsets[i]
        stop = self.sector_offsets[i + 1] if i + 1 < len(SECTOR_ORDER) else len(self.modes)
        return range(start, stop)

    def sector_modes(self, species: int, charge: int) -> tuple[Mode, ...]:
        r = self.sector_range(species, charge)
        return self.modes[r.start : r.stop]

    def sector_weights(self, species: int, charge: int) -> np.ndarray:
        return np.array([m.weight for m in self.sector_modes(species, charge)])

    def species_mask(self, species: int) -> int:
        mask = 0
        for charge in CHARGES:
            for k in self.sector_range(species, charge):
                mask |= 1 << k
        return mask

    def string_masks(self) -> tuple[int, ...]:
        """Per-mode bitmask of the same-group modes strictly earlier in order.

        The parity of the occupied bits under this mask is the sign picked up
        by the ladder operators of that mode.
        """
        group_of_mode = [self.groups[m.species] for m in self.modes]
        masks = []
        for k in range(len(self.modes)):
            mask = 0
            for j in range(k):
                if group_of_mode[j] == group_of_mode[k]:
                    mask |= 1 << j
            masks.append(mask)
        return tuple(masks)


def build_mode_table(
    nodes: Mapping[int, Sequence[tuple[Sequence[float], float]]],
    spins: Mapping[int, Sequence[float]] | None = None,
    groups: Mapping[int, str] | None = None,
) -> ModeTable:
    """Build the normative sector-ordered mode table.

    ``nodes`` maps species to a list of ``(momentum_3vector, weight)`` pairs;
    the same nodes are used for the particle and antiparticle sectors.
    ``spins`` optionally restricts the spin/helicity values per species
    (default: the full domain).
    """
    spins = spins or {}
    for s in SPECIES:
        if s not in nodes or len(nodes[s]) == 0:
            raise ConfigurationError(f"species {s} has no momentum nodes")
    modes: list[Mode] = []
    offsets: list[int] = []
    for species, charge in SECTOR_ORDER:
        offsets.append(len(modes))
        spin_values = tuple(spins.get(species, SPIN_DOMAIN[species]))
        for spin in spin_values:
            if spin not in SPIN_DOMAIN[species]:
                raise ConfigurationError(
                    f"spin {spin} outside domain {SPIN_DOMAIN[species]} for species {species}"
                )
        for node_index, (p, w) in enumerate(nodes[species]):
            p = tuple(float(c) for c in p)
            if len(p) != 3:
                raise ConfigurationError(f"momentum node {p} is not a 3-vector")
            if p == (0.0, 0.0, 0.0):
                raise InfraredGridError(
                    f"species {species} node {node_index} sits at |p|=0"
                )
            if not w > 0:
                raise ConfigurationError(
                    f"species {species} node {node_index} has non-positive weight {w}"
                )
            for spin in sorted(spin_values):
                modes.append(Mode(species, charge, p, float(spin), float(w)))
    return ModeTable(tuple(modes), tuple(offsets), dict(groups or DEFAULT_GROUPS))


@dataclass(frozen=True)
class FockBasis:
    """All occupation patterns with total popcount <= n_max.

    States are ordered by popcount, then by bit pattern value; the vacuum is
    state 0.  Immutable and safe to share across threads.
    """

    table: ModeTable
    n_max: int
    states: tuple[int, ...]
    index_of: Mapping[int, int]
    string_masks: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    def popcounts(self) -> np.ndarray:
        return np.array([s.bit_count() for s in self.states])


def basis_size(n_modes: int, n_max: int) -> int:
    return sum(comb(n_modes, n) for n in range(min(n_max, n_modes) + 1))


def build_basis(table: ModeTable, n_max: int, max_states: int = 1_000_000) -> FockBasis:
    if n_max < 0:
        raise ConfigurationError(f"n_max must be >= 0, got {n_max}")
    m = table.n_modes
    size = basis_size(m, n_max)
    if size > max_states:
        raise ResourceError(
            f"basis of {size} states exceeds the cap of {max_states}"
        )
    states: list[int] = []
    for n in range(min(n_max, m) + 1):
        layer = [sum(1 << k for k in combo) for combo in combinations(range(m), n)]
        layer.sort()
        states.extend(layer)
    index_of = {s: i for i, s in enumerate(states)}
    return FockBasis(table, n_max, tuple(states), index_of, table.string_masks())


def _sign(state: int, mask: int) -> int:
    return -1 if (state & mask).bit_count() & 1 else 1


def apply_annihilate(state: int, k: int, mask: int) -> tuple[int, int] | None:
    """Clear bit k; returns (new_state, sign) or None if unoccupied."""
    bit = 1 << k
    if not state & bit:
        return None
    return state ^ bit, _sign(state, mask)


def apply_create(state: int, k: int, mask: int) -> tuple[int, int] | None:
    """Set bit k; returns (new_state, sign) or None if already occupied."""
    bit = 1 << k
    if state & bit:
        return None
    return state | bit, _sign(state, mask)


def annihilator(basis: FockBasis, mode_index: int) -> csr_matrix:
    """Matrix of the pointwise annihilation operator for one global mode."""
    if not 0 <= mode_index < basis.table.n_modes:
        raise ConfigurationError(f"mode index {mode_index} out of range")
    mask = basis.string_masks[mode_index]
    rows, cols, vals = [], [], []
    for col, state in enumerate(basis.states):
        hit = apply_annihilate(state, mode_index, mask)
        if hit is None:
            continue
        new_state, sign = hit
        rows.append(basis.index_of[new_state])
        cols.append(col)
        vals.append(float(sign))
    return csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def creator(basis: FockBasis, mode_index: int) -> csr_matrix:
    """Exact conjugate transpose of the matching annihilator."""
    return csr_matrix(annihilator(basis, mode_index).conj().T)


def smeared_annihilator(
    basis: FockBasis, species: int, charge: int, phi: Sequence[complex]
) -> csr_matrix:
    """Annihilator smeared against an amplitude on one sector.

    Each mode enters with sqrt(weight) * conj(phi), the discretization of
    integrating the pointwise operator against conj(phi); the operator norm
    then equals the discrete L2 norm of phi on untruncated bases.
    """
    sector = basis.table.sector_range(species, charge)
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (len(sector),):
        raise ConfigurationError(
            f"amplitude has {phi.size} entries, sector has {len(sector)} modes"
        )
    coeffs = {
        k: sqrt(basis.table.modes[k].weight) * np.conj(phi[j])
        for j, k in enumerate(sector)
        if phi[j] != 0
    }
    rows, cols, vals = [], [], []
    for col, state in enumerate(basis.states):
        for k, c in coeffs.items():
            hit = apply_annihilate(state, k, basis.string_masks[k])
            if hit is None:
                continue
            new_state, sign = hit
            rows.append(basis.index_of[new_state])
            cols.append(col)
            vals.append(sign * c)
    return csr_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )


def sector_norm(table: ModeTable, species: int, charge: int, phi: Sequence[complex]) -> float:
    """Discrete L2 norm sqrt(sum w |phi|^2) over one sector."""
    w = table.sector_weights(species, charge)
    phi = np.asarray(phi, dtype=complex)
    return float(np.sqrt(np.sum(w * np.abs(phi) ** 2)))


def number_operator(basis: FockBasis, species: int) -> csr_matrix:
    """Diagonal count of occupied modes of both charges of one species."""
    if species not in SPECIES:
        raise ConfigurationError(f"unknown species {species}")
    mask = basis.table.species_mask(species)
    diag = np.array([(s & mask).bit_count() for s in basis.states], dtype=float)
    return _diag_csr(diag)


def total_number_operator(basis: FockBasis) -> csr_matrix:
    diag = basis.popcounts().astype(float)
    return _diag_csr(diag)


def conserved_charges(basis: FockBasis) -> np.ndarray:
    """(n1+n4, n2+n4, n3+n4) per basis state; each is conserved by the model."""
    masks = [basis.table.species_mask(s) for s in SPECIES]
    out = np.empty((basis.dim, 3), dtype=int)
    for i, s in enumerate(basis.states):
        n = [(s & m).bit_count() for m in masks]
        out[i] = (n[0] + n[3], n[1] + n[3], n[2] + n[3])
    return out


def _diag_csr(diag: np.ndarray) -> csr_matrix:
    n = len(diag)
    idx = np.arange(n)
    return csr_matrix((diag, (idx, idx)), shape=(n, n))


def is_hermitian(op: csr_matrix, tol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    return abs(diff).max() <= tol if diff.nnz else True
