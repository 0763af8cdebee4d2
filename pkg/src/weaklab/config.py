"""Run-configuration parsing, kernel files, and config hashing.

Configs are JSON; all physical quantities are in natural units.  The config
hash is the sha256 of the canonical (sorted-keys, no-whitespace) JSON text
and is echoed into every output row for regression diffing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, KernelFormatError
from .fock import CHARGES, SPECIES, FockBasis, ModeTable, build_basis, build_mode_table
from .model import (
    CHANNELS,
    Kernel,
    PhysicalParams,
    channel_shape,
    quark_decay_kernel,
    sharp_cutoff_kernel,
    smooth_gaussian_kernel,
)

KERNEL_PRESETS = ("sharp", "smooth-gaussian", "quark-decay", "file")


@dataclass
class RunConfig:
    """Parsed configuration for one CLI invocation."""

    grid: dict[int, list[tuple[tuple[float, float, float], float]]]
    spins: dict[int, list[float]]
    params: PhysicalParams
    n_max: int
    kernel_spec: dict
    scan: dict[str, list[float]]
    windows: list[tuple[float, float]]
    checks: list[str]
    lam: float
    e_max: float | None
    tol: float
    seed: int
    output: str | None
    max_states: int
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def demo_grid(
    n_nodes: int = 2, p_min: float = 0.4, p_max: float = 0.8
) -> dict[int, list[tuple[tuple[float, float, float], float]]]:
    """Equispaced nodes on the z-axis with trapezoid-like unit weights."""
    ps = np.linspace(p_min, p_max, n_nodes)
    w = (p_max - p_min) / max(n_nodes - 1, 1) if n_nodes > 1 else 1.0
    nodes = [((0.0, 0.0, float(p)), float(w)) for p in ps]
    return {s: list(nodes) for s in SPECIES}


def single_mode_spins() -> dict[int, list[float]]:
    """One spin value per species: the minimal 8-mode configuration."""
    return {1: [0.5], 2: [1.0], 3: [1.0], 4: [0.5]}


def _parse_grid(obj: dict) -> dict[int, list[tuple[tuple[float, float, float], float]]]:
    grid = {}
    for key, nodes in obj.items():
        try:
            species = int(key)
        except ValueError as exc:
            raise ConfigurationError(f"grid key {key!r} is not a species") from exc
        if species not in SPECIES:
            raise ConfigurationError(f"unknown species {species} in grid")
        parsed = []
        for i, node in enumerate(nodes):
            try:
                p = tuple(float(c) for c in node["p"])
                w = float(node["w"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigurationError(
                    f"grid species {species} node {i}: expected {{'p': [x,y,z], 'w': weight}}"
                ) from exc
            parsed.append((p, w))
        grid[species] = parsed
    return grid


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    try:
        params = PhysicalParams(**raw.get("params", {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad params block: {exc}") from exc

    grid = _parse_grid(raw.get("grid", {})) if raw.get("grid") else demo_grid()
    spins = {
        int(k): [float(v) for v in vs] for k, vs in raw.get("spins", {}).items()
    } or single_mode_spins()

    kernel_spec = dict(raw.get("kernel", {"preset": "smooth-gaussian"}))
    preset = kernel_spec.get("preset")
    if preset not in KERNEL_PRESETS:
        raise ConfigurationError(
            f"kernel preset {preset!r} not in {KERNEL_PRESETS}"
        )

    scan = {}
    for axis in ("g", "sigma", "lambda"):
        vals = raw.get("scan", {}).get(axis)
        if vals is not None:
            if not isinstance(vals, list) or not vals:
                raise ConfigurationError(f"scan axis {axis!r} must be a nonempty list")
            scan[axis] = [float(v) for v in vals]

    windows = []
    for w in raw.get("windows", []):
        if len(w) != 2 or not float(w[0]) < float(w[1]):
            raise ConfigurationError(f"window {w} must be [a, b] with a < b")
        windows.append((float(w[0]), float(w[1])))

    n_max = int(raw.get("n_max", 4))
    lam = float(raw.get("lambda", params.m1 / 2))
    tol = float(raw.get("tol", 1e-10))
    if tol <= 0:
        raise ConfigurationError("tol must be positive")

    return RunConfig(
        grid=grid,
        spins=spins,
        params=params,
        n_max=n_max,
        kernel_spec=kernel_spec,
        scan=scan,
        windows=windows,
        checks=list(raw.get("checks", [])),
        lam=lam,
        e_max=float(raw["e_max"]) if "e_max" in raw else None,
        tol=tol,
        seed=int(raw.get("seed", 0)),
        output=raw.get("output"),
        max_states=int(raw.get("max_states", 1_000_000)),
        raw=raw,
    )


def build_table(cfg: RunConfig) -> ModeTable:
    return build_mode_table(cfg.grid, spins=cfg.spins)


def build_kernel(cfg: RunConfig, table: ModeTable) -> Kernel:
    spec = cfg.kernel_spec
    preset = spec["preset"]
    lam_uv = float(spec.get("lambda_uv", cfg.params.lambda_uv))
    if preset == "sharp":
        return sharp_cutoff_kernel(table, lam_uv)
    if preset == "smooth-gaussian":
        return smooth_gaussian_kernel(
            table, lam_uv, amplitude=float(spec.get("amplitude", 1.0))
        )
    if preset == "quark-decay":
        shape = channel_shape(table, (1, -1))
        amp = complex(spec.get("amplitude", 1.0))
        tensor = np.full(shape, amp, dtype=complex)
        return quark_decay_kernel(table, tensor)
    if preset == "file":
        path = spec.get("path")
        if not path:
            raise ConfigurationError("kernel preset 'file' needs a 'path' entry")
        file_table, kernel = load_kernel_file(path)
        _check_grid_match(table, file_table, path)
        return Kernel(table, kernel.channels, label=kernel.label)
    raise ConfigurationError(f"unknown kernel preset {preset!r}")


def build_all(cfg: RunConfig) -> tuple[ModeTable, FockBasis, Kernel]:
    table = build_table(cfg)
    basis = build_basis(table, cfg.n_max, max_states=cfg.max_states)
    kernel = build_kernel(cfg, table)
    return table, basis, kernel


def _check_grid_match(table: ModeTable, file_table: ModeTable, path: str) -> None:
    if len(table.modes) != len(file_table.modes):
        raise ConfigurationError(
            f"kernel file {path} declares {len(file_table.modes)} modes, "
            f"config grid has {len(table.modes)}"
        )
    for k, (a, b) in enumerate(zip(table.modes, file_table.modes)):
        same = (
            a.species == b.species
            and a.charge == b.charge
            and np.allclose(a.momentum, b.momentum)
            and a.spin == b.spin
            and np.isclose(a.weight, b.weight)
        )
        if not same:
            raise ConfigurationError(
                f"kernel file {path} mode {k} disagrees with the config grid"
            )


# ---------------------------------------------------------------------------
# kernel file format
#
#   # comment
#   sector <species> <charge>
#   node <px> <py> <pz> <spin> <weight>
#   ...
#   channel <eps> <epsp>
#   entry <i1> <i2> <i3> <i4> <re> <im>
#
# Node indices in entry lines refer to the per-slot sector mode lists in
# declaration order; unspecified entries default to 0.


def load_kernel_file(path: str) -> tuple[ModeTable, Kernel]:
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise KernelFormatError(f"cannot read kernel file {path}: {exc}") from exc

    nodes: dict[int, list] = {}
    spins: dict[int, list[float]] = {}
    sector_decls: dict[tuple[int, int], list] = {}
    entries: dict[tuple[int, int], list] = {}
    current_sector = None
    current_channel = None

    def err(lineno: int, msg: str):
        return KernelFormatError(f"{path}:{lineno}: {msg}")

    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        tag = parts[0]
        if tag == "sector":
            if len(parts) != 3:
                raise err(lineno, "expected: sector <species> <charge>")
            try:
                species, charge = int(parts[1]), int(parts[2])
            except ValueError:
                raise err(lineno, f"non-integer sector labels {parts[1:]}") from None
            if species not in SPECIES or charge not in CHARGES:
                raise err(lineno, f"unknown sector ({species}, {charge})")
            current_sector = (species, charge)
            current_channel = None
            sector_decls.setdefault(current_sector, [])
        elif tag == "node":
            if current_sector is None:
                raise err(lineno, "node line before any sector line")
            if len(parts) != 6:
                raise err(lineno, "expected: node px py pz spin weight")
            try:
                vals = [float(v) for v in parts[1:]]
            except ValueError:
                raise err(lineno, f"non-numeric node values {parts[1:]}") from None
            sector_decls[current_sector].append(
                ((vals[0], vals[1], vals[2]), vals[3], vals[4])
            )
        elif tag == "channel":
            if len(parts) != 3:
                raise err(lineno, "expected: channel <eps> <epsp>")
            try:
                ch = (int(parts[1]), int(parts[2]))
            except ValueError:
                raise err(lineno, f"non-integer channel charges {parts[1:]}") from None
            if ch not in CHANNELS:
                raise err(lineno, f"channel {ch} is not one of {CHANNELS}")
            current_channel = ch
            current_sector = None
            entries.setdefault(ch, [])
        elif tag == "entry":
            if current_channel is None:
                raise err(lineno, "entry line before any channel line")
            if len(parts) != 7:
                raise err(lineno, "expected: entry i1 i2 i3 i4 re im")
            try:
                idx = [int(v) for v in parts[1:5]]
                re_im = [float(v) for v in parts[5:]]
            except ValueError:
                raise err(lineno, f"non-numeric entry values {parts[1:]}") from None
            entries[current_channel].append((lineno, idx, complex(*re_im)))
        else:
            raise err(lineno, f"unknown directive {tag!r}")

    # assemble the mode table: particle/antiparticle sectors share nodes only
    # if declared identically; build_mode_table wants per-species nodes, so we
    # require matching declarations for the two charges of each species.
    for s in SPECIES:
        plus = sector_decls.get((s, 1))
        minus = sector_decls.get((s, -1))
        if not plus or not minus:
            raise KernelFormatError(
                f"{path}: species {s} needs both charge sectors declared"
            )
        if plus != minus:
            raise KernelFormatError(
                f"{path}: species {s} particle/antiparticle node lists differ"
            )
        nodes[s] = [(p, w) for p, _, w in plus]
        spins[s] = sorted(set(spin for _, spin, _ in plus))
    table = build_mode_table(nodes, spins=spins)

    channels = {}
    for ch, ch_entries in entries.items():
        shape = channel_shape(table, ch)
        tensor = np.zeros(shape, dtype=complex)
        for lineno, idx, value in ch_entries:
            for ax, (i, n) in enumerate(zip(idx, shape)):
                if not 0 <= i < n:
                    raise KernelFormatError(
                        f"{path}:{lineno}: slot {ax + 1} index {i} out of "
                        f"range [0, {n})"
                    )
            tensor[tuple(idx)] = value
        channels[ch] = tensor
    if not channels:
        raise KernelFormatError(f"{path}: no channel entries found")
    return table, Kernel(table, channels, label="file")
