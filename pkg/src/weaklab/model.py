"""Dispersions, interaction kernels, and sparse Hamiltonian assembly.

The interaction couples a species-4 annihilator to creators of species 1, 2,
3 across the two charge channels (+,-) and (-,+).  Kernels are dense complex
tensors over mode 4-tuples, small enough at desk scale to keep exact discrete
L2 norms.  Every integral over the grid is a weighted sum; each ladder factor
inside an integral carries sqrt(weight) so that number operators stay exactly
diagonal with integer eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .errors import ConfigurationError
from .fock import (
    FockBasis,
    Mode,
    ModeTable,
    apply_annihilate,
    apply_create,
    _diag_csr,
)

# the two charge channels of the interaction: (epsilon, epsilon') with
# epsilon != epsilon'
CHANNELS = ((1, -1), (-1, 1))


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, coupling, cutoffs, and the free split parameter eta."""

    m1: float
    m4: float
    g: float
    lambda_uv: float = 1.0
    sigma: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not self.m1 > 0 or not self.m4 > 0:
            raise ConfigurationError("masses must be strictly positive")
        if not self.m1 < self.m4:
            raise ConfigurationError("m1 must be smaller than m4")
        if not self.lambda_uv > 0:
            raise ConfigurationError("lambda_uv must be positive")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")
        if not self.eta > 0:
            raise ConfigurationError("eta must be positive")


def dispersion(species: int, p: Sequence[float], params: PhysicalParams) -> float:
    """Single-particle energy: massive branches for 1 and 4, |p| for 2 and 3."""
    p2 = float(np.dot(p, p))
    if species == 1:
        return sqrt(p2 + params.m1**2)
    if species == 4:
        return sqrt(p2 + params.m4**2)
    if species in (2, 3):
        return sqrt(p2)
    raise ConfigurationError(f"unknown species {species}")


def mode_energy(mode: Mode, params: PhysicalParams) -> float:
    return dispersion(mode.species, mode.momentum, params)


def _channel_sectors(kind: str, channel: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """(species, charge) per tensor axis for a 4-slot or reduced kernel."""
    eps, epsp = channel
    if kind == "full":
        return ((1, eps), (2, epsp), (3, eps), (4, eps))
    raise ValueError(kind)


def channel_shape(table: ModeTable, channel: tuple[int, int]) -> tuple[int, ...]:
    return tuple(len(table.sector_range(s, c)) for s, c in _channel_sectors("full", channel))


def _weight_tensor(table: ModeTable, sectors) -> np.ndarray:
    ws = [table.sector_weights(s, c) for s, c in sectors]
    grids = np.meshgrid(*ws, indexing="ij")
    return np.prod(grids, axis=0)


def _pabs_arrays(table: ModeTable, sectors) -> list[np.ndarray]:
    return [
        np.array([m.p_abs for m in table.sector_modes(s, c)]) for s, c in sectors
    ]


@dataclass
class Kernel:
    """Per-channel complex tensor over (species 1, 2, 3, 4) mode 4-tuples.

    ``dilation_channels`` holds the kernel of the dilation commutator,
    sum_j (2 p_j.grad_j + 3) G, when it is available in closed form; it is
    None for non-differentiable kernels, which the Mourre machinery rejects.
    ``evaluator`` maps four momentum 3-vectors to a kernel value and backs
    finite-difference regularity diagnostics.
    """

    table: ModeTable
    channels: Mapping[tuple[int, int], np.ndarray]
    label: str = "custom"
    evaluator: Callable[..., complex] | None = None
    dilation_channels: Mapping[tuple[int, int], np.ndarray] | None = None
    l2_norms: dict = field(default_factory=dict)

    def __post_init__(self):
        for ch, tensor in self.channels.items():
            if ch[0] == ch[1]:
                raise ConfigurationError(f"channel {ch} has equal charges")
            want = channel_shape(self.table, ch)
            if tuple(tensor.shape) != want:
                raise ConfigurationError(
                    f"channel {ch} tensor shape {tensor.shape} != sector shape {want}"
                )
        if not self.l2_norms:
            self.l2_norms = {ch: self.compute_l2_norm(ch) for ch in self.channels}

    def compute_l2_norm(self, channel: tuple[int, int]) -> float:
        sectors = _channel_sectors("full", channel)
        wt = _weight_tensor(self.table, sectors)
        return float(np.sqrt(np.sum(wt * np.abs(self.channels[channel]) ** 2)))

    def norm_sum(self) -> float:
        return sum(self.l2_norms.values())

    def is_smooth(self) -> bool:
        return self.dilation_channels is not None


def infrared_cutoff(kernel: Kernel, sigma: float) -> Kernel:
    """Zero all entries with |p2| < sigma or |p3| < sigma."""
    if sigma < 0:
        raise ConfigurationError("sigma must be nonnegative")
    if sigma == 0:
        return Kernel(
            kernel.table,
            dict(kernel.channels),
            label=kernel.label,
            evaluator=kernel.evaluator,
            dilation_channels=kernel.dilation_channels,
        )
    channels = {}
    for ch, tensor in kernel.channels.items():
        sectors = _channel_sectors("full", ch)
        p2, p3 = _pabs_arrays(kernel.table, sectors)[1:3]
        keep = (p2[:, None] >= sigma) & (p3[None, :] >= sigma)
        out = tensor * keep[None, :, :, None]
        channels[ch] = out
    # the sharp indicator destroys differentiability
    return Kernel(kernel.table, channels, label=f"{kernel.label}|sigma={sigma}")


def sharp_cutoff_kernel(table: ModeTable, lambda_uv: float) -> Kernel:
    """Indicator of max_j |p_j| <= Lambda on both channels."""
    if not lambda_uv > 0:
        raise ConfigurationError("lambda_uv must be positive")
    channels = {}
    for ch in CHANNELS:
        sectors = _channel_sectors("full", ch)
        ps = _pabs_arrays(table, sectors)
        inside = (
            (ps[0][:, None, None, None] <= lambda_uv)
            & (ps[1][None, :, None, None] <= lambda_uv)
            & (ps[2][None, None, :, None] <= lambda_uv)
            & (ps[3][None, None, None, :] <= lambda_uv)
        )
        channels[ch] = inside.astype(complex)
    return Kernel(table, channels, label="sharp")


def smooth_gaussian_kernel(
    table: ModeTable, lambda_uv: float, amplitude: float = 1.0
) -> Kernel:
    """Mollified cutoff amplitude * exp(-sum_j |p_j|^2 / Lambda^2).

    The dilation-derivative kernel (12 - 4 sum_j |p_j|^2 / Lambda^2) G is
    attached in closed form.
    """
    if not lambda_uv > 0:
        raise ConfigurationError("lambda_uv must be positive")
    channels = {}
    dilation = {}
    for ch in CHANNELS:
        sectors = _channel_sectors("full", ch)
        ps = _pabs_arrays(table, sectors)
        p2sum = (
            ps[0][:, None, None, None] ** 2
            + ps[1][None, :, None, None] ** 2
            + ps[2][None, None, :, None] ** 2
            + ps[3][None, None, None, :] ** 2
        )
        g = amplitude * np.exp(-p2sum / lambda_uv**2).astype(complex)
        channels[ch] = g
        dilation[ch] = (12.0 - 4.0 * p2sum / lambda_uv**2) * g

    def evaluator(p1, p2, p3, p4):
        s = sum(float(np.dot(p, p)) for p in (p1, p2, p3, p4))
        return amplitude * np.exp(-s / lambda_uv**2)

    return Kernel(
        table,
        channels,
        label="smooth-gaussian",
        evaluator=evaluator,
        dilation_channels=dilation,
    )


def quark_decay_kernel(table: ModeTable, tensor: np.ndarray) -> Kernel:
    """Single-channel interaction: only (+,-) is populated."""
    tensor = np.asarray(tensor, dtype=complex)
    want = channel_shape(table, (1, -1))
    if tuple(tensor.shape) != want:
        raise ConfigurationError(
            f"quark-decay tensor shape {tensor.shape} != sector shape {want}"
        )
    return Kernel(table, {(1, -1): tensor}, label="quark-decay")


def infrared_diagnostic(kernel: Kernel) -> float:
    """Discretized infrared integrability sum.

    Sum over channels and over tuples inside the unit momentum ball of
    w1 w2 w3 w4 |G|^2 (1/|p2|^2 + 1/|p3|^2).
    """
    total = 0.0
    for ch, tensor in kernel.channels.items():
        sectors = _channel_sectors("full", ch)
        wt = _weight_tensor(kernel.table, sectors)
        ps = _pabs_arrays(kernel.table, sectors)
        p2sum = (
            ps[0][:, None, None, None] ** 2
            + ps[1][None, :, None, None] ** 2
            + ps[2][None, None, :, None] ** 2
            + ps[3][None, None, None, :] ** 2
        )
        ball = p2sum <= 1.0
        inv = (
            1.0 / ps[1][None, :, None, None] ** 2
            + 1.0 / ps[2][None, None, :, None] ** 2
        )
        total += float(np.sum(wt * np.abs(tensor) ** 2 * inv * ball))
    return total


def ir_weighted_integral(kernel: Kernel, j: int) -> float:
    """Full-domain sum over channels of w1..w4 |G|^2 / |p_j|^2 for j=2,3."""
    if j not in (2, 3):
        raise ConfigurationError("the infrared weight divides by |p2| or |p3| only")
    total = 0.0
    axis = j - 1
    for ch, tensor in kernel.channels.items():
        sectors = _channel_sectors("full", ch)
        wt = _weight_tensor(kernel.table, sectors)
        pj = _pabs_arrays(kernel.table, sectors)[axis]
        shape = [1, 1, 1, 1]
        shape[axis] = -1
        total += float(np.sum(wt * np.abs(tensor) ** 2 / pj.reshape(shape) ** 2))
    return total


def kernel_difference_norms(a: Kernel, b: Kernel) -> dict[tuple[int, int], float]:
    """Per-channel discrete L2 norm of a - b (missing channels count as 0)."""
    out = {}
    for ch in set(a.channels) | set(b.channels):
        sectors = _channel_sectors("full", ch)
        wt = _weight_tensor(a.table, sectors)
        ta = a.channels.get(ch)
        tb = b.channels.get(ch)
        if ta is None:
            diff = -tb
        elif tb is None:
            diff = ta
        else:
            diff = ta - tb
        out[ch] = float(np.sqrt(np.sum(wt * np.abs(diff) ** 2)))
    return out


# ---------------------------------------------------------------------------
# operator assembly


def product_operator(
    basis: FockBasis,
    slots: Sequence[tuple[int, int, str]],
    tensor: np.ndarray,
) -> csr_matrix:
    """Weighted sum of ladder-operator monomials.

    ``slots`` lists (species, charge, kind) per tensor axis in the order the
    factors are written; kind is 'c' (creator) or 'a' (annihilator).  Factors
    apply right to left.  Each factor contributes sqrt(weight) so the sum
    discretizes the corresponding integral.
    """
    table = basis.table
    mode_lists = []
    sqrt_w = []
    for species, charge, kind in slots:
        if kind not in ("a", "c"):
            raise ConfigurationError(f"unknown ladder kind {kind!r}")
        r = table.sector_range(species, charge)
        mode_lists.append(list(r))
        sqrt_w.append(np.sqrt(table.sector_weights(species, charge)))
    coeff = np.asarray(tensor, dtype=complex)
    if coeff.shape != tuple(len(ml) for ml in mode_lists):
        raise ConfigurationError(
            f"tensor shape {coeff.shape} does not match slot sectors"
        )
    for axis, w in enumerate(sqrt_w):
        shape = [1] * coeff.ndim
        shape[axis] = -1
        coeff = coeff * w.reshape(shape)

    kinds = [kind for _, _, kind in slots]
    masks = basis.string_masks
    entries: dict[tuple[int, int], complex] = {}
    nonzero = np.argwhere(np.abs(coeff) != 0)
    for idx in nonzero:
        value = coeff[tuple(idx)]
        ks = [mode_lists[ax][i] for ax, i in enumerate(idx)]
        for col, state in enumerate(basis.states):
            cur, sign = state, 1
            ok = True
            for k, kind in zip(reversed(ks), reversed(kinds)):
                step = (
                    apply_annihilate(cur, k, masks[k])
                    if kind == "a"
                    else apply_create(cur, k, masks[k])
                )
                if step is None:
                    ok = False
                    break
                cur, s = step
                sign *= s
            if not ok:
                continue
            row = basis.index_of.get(cur)
            if row is None:  # pushed outside the truncation
                continue
            key = (row, col)
            entries[key] = entries.get(key, 0.0) + sign * value
    if not entries:
        return csr_matrix((basis.dim, basis.dim), dtype=complex)
    rows, cols = zip(*entries.keys())
    vals = np.array(list(entries.values()), dtype=complex)
    return csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def state_energies(basis: FockBasis, params: PhysicalParams) -> np.ndarray:
    """Free energy of each basis state: sum of occupied-mode dispersions."""
    energies = np.array([mode_energy(m, params) for m in basis.table.modes])
    out = np.empty(basis.dim)
    for i, state in enumerate(basis.states):
        e, s = 0.0, state
        while s:
            k = (s & -s).bit_length() - 1
            e += energies[k]
            s &= s - 1
        out[i] = e
    return out


def assemble_H0(basis: FockBasis, params: PhysicalParams) -> csr_matrix:
    return _diag_csr(state_energies(basis, params))


def channel_operator(
    basis: FockBasis, kernel: Kernel, channel: tuple[int, int]
) -> csr_matrix:
    """The raw interaction monomial b*1 b*2 b*3 b4 of one channel."""
    eps, epsp = channel
    slots = ((1, eps, "c"), (2, epsp, "c"), (3, eps, "c"), (4, eps, "a"))
    return product_operator(basis, slots, kernel.channels[channel])


def assemble_HI(basis: FockBasis, kernel: Kernel) -> csr_matrix:
    """Hermitian interaction: channel monomials plus their adjoints."""
    op = csr_matrix((basis.dim, basis.dim), dtype=complex)
    for ch in kernel.channels:
        op = op + channel_operator(basis, kernel, ch)
    return csr_matrix(op + op.conj().T)


def assemble_H(basis: FockBasis, params: PhysicalParams, kernel: Kernel) -> csr_matrix:
    return csr_matrix(assemble_H0(basis, params) + params.g * assemble_HI(basis, kernel))


def assemble_H_sigma(
    basis: FockBasis, params: PhysicalParams, kernel: Kernel, sigma: float
) -> csr_matrix:
    """Infrared-cutoff Hamiltonian: plain kernel substitution."""
    return assemble_H(basis, params, infrared_cutoff(kernel, sigma))


# ---------------------------------------------------------------------------
# reduced kernels (three-slot operators)


@dataclass
class ReducedKernel:
    """Kernel over mode 3-tuples for the reduced operators.

    ``species`` is the ordered slot triple, e.g. (1, 2, 3) for the pure
    annihilation operator or (1, 3, 4) / (1, 2, 4) for the single-neutrino
    interaction pieces.  The middle slot carries the opposite charge.
    """

    table: ModeTable
    species: tuple[int, int, int]
    channels: Mapping[tuple[int, int], np.ndarray]
    l2_norms: dict = field(default_factory=dict)

    def slot_sectors(self, channel: tuple[int, int]):
        eps, epsp = channel
        a, b, c = self.species
        return ((a, eps), (b, epsp), (c, eps))

    def __post_init__(self):
        for ch, tensor in self.channels.items():
            if ch[0] == ch[1]:
                raise ConfigurationError(f"channel {ch} has equal charges")
            want = tuple(
                len(self.table.sector_range(s, c)) for s, c in self.slot_sectors(ch)
            )
            if tuple(tensor.shape) != want:
                raise ConfigurationError(
                    f"channel {ch} tensor shape {tensor.shape} != sector shape {want}"
                )
        if not self.l2_norms:
            self.l2_norms = {ch: self.compute_l2_norm(ch) for ch in self.channels}

    def compute_l2_norm(self, channel: tuple[int, int]) -> float:
        ws = [
            self.table.sector_weights(s, c) for s, c in self.slot_sectors(channel)
        ]
        wt = np.prod(np.meshgrid(*ws, indexing="ij"), axis=0)
        return float(np.sqrt(np.sum(wt * np.abs(self.channels[channel]) ** 2)))


def triple_annihilation_operator(
    basis: FockBasis, rk: ReducedKernel, channel: tuple[int, int]
) -> csr_matrix:
    """A = integral of conj(kernel) b_s3 b_s2 b_s1 for species triple (s1,s2,s3)."""
    secs = rk.slot_sectors(channel)
    slots = (
        (*secs[2], "a"),
        (*secs[1], "a"),
        (*secs[0], "a"),
    )
    tensor = np.conj(rk.channels[channel]).transpose(2, 1, 0)
    return product_operator(basis, slots, tensor)


def single_neutrino_operator(
    basis: FockBasis, rk: ReducedKernel, channel: tuple[int, int]
) -> csr_matrix:
    """V = integral of kernel b*_s1 b*_s2 b_4 for species triple (s1, s2or3, 4)."""
    secs = rk.slot_sectors(channel)
    slots = ((*secs[0], "c"), (*secs[1], "c"), (*secs[2], "a"))
    return product_operator(basis, slots, rk.channels[channel])
