"""Command-line front end: build, gs-scan, ir-scan, mourre, verify.

Scan commands write CSV tables with a stable column order plus a JSON
metadata sidecar; the timestamp lives only in the sidecar so repeated runs
with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np
from scipy.sparse import csr_matrix

from . import checks as checks_mod
from .config import RunConfig, build_all, load_config
from .errors import (
    ConfigurationError,
    KernelRegularityError,
    SolverError,
    ThresholdCollisionError,
)
from .model import (
    assemble_H0,
    assemble_HI,
    infrared_cutoff,
    infrared_diagnostic,
    ir_weighted_integral,
    kernel_difference_norms,
    state_energies,
)
from .fock import number_operator
from .spectral import (
    commutator_A_H0,
    commutator_A_HI,
    dilation_kernel,
    ground_state,
    mourre_bottom,
    projection_neutrino_vacuum,
    projection_P_lambda,
    sector_ground_state,
    thresholds,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

GS_COLUMNS = (
    "config_hash",
    "g",
    "sigma",
    "energy",
    "overlap",
    "deficiency_heavy",
    "deficiency_neutrino",
    "residual",
    "status",
)
IR_COLUMNS = (
    "config_hash",
    "g",
    "sigma",
    "energy",
    "kernel_diff_norm",
    "overlap",
    "ratio_j2",
    "ratio_j3",
    "residual",
    "status",
)
MOURRE_COLUMNS = (
    "config_hash",
    "g",
    "delta_low",
    "delta_high",
    "beta",
    "bottom",
    "dim_window",
    "status",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12e")
    return str(x)


def _write_csv(path: str, columns: tuple[str, ...], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def _write_metadata(path: str, cfg: RunConfig, command: str, columns) -> None:
    meta = {
        "command": command,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "columns": list(columns),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def _scan_map(fn, points, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, points))
    return [fn(p) for p in points]


def _overlap_diagnostics(basis, params, lam, phi) -> dict:
    p_lam = projection_P_lambda(basis, params, lam).diagonal().real
    p_nv = projection_neutrino_vacuum(basis).diagonal().real
    overlap = float(np.real(np.vdot(phi, p_lam * p_nv * phi)))
    return {
        "overlap": overlap,
        "deficiency_heavy": float(np.real(np.vdot(phi, (1.0 - p_lam) * p_nv * phi))),
        "deficiency_neutrino": float(np.real(np.vdot(phi, (1.0 - p_nv) * phi))),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(cfg: RunConfig, out: str | None) -> int:
    table, basis, kernel = build_all(cfg)
    h0 = assemble_H0(basis, cfg.params)
    hi = assemble_HI(basis, kernel)
    lines = [
        f"config hash      {cfg.hash}",
        f"modes            {table.n_modes}",
        f"n_max            {basis.n_max}",
        f"basis dim        {basis.dim}",
        f"H0 nonzeros      {h0.nnz}",
        f"HI nonzeros      {hi.nnz}",
    ]
    for ch, norm in sorted(kernel.l2_norms.items()):
        lines.append(f"kernel L2 {ch}    {norm:.12e}")
    if kernel.norm_sum() == 0.0:
        lines.append("warning: kernel has zero norm on every channel")
    lines.append(f"infrared (H1)    {infrared_diagnostic(kernel):.12e}")
    text = "\n".join(lines)
    print(text)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    return EXIT_OK


def cmd_gs_scan(cfg: RunConfig, out: str, threads: int) -> int:
    if "g" not in cfg.scan:
        raise ConfigurationError("gs-scan needs a nonempty scan.g list")
    _, basis, kernel = build_all(cfg)
    params = cfg.params
    k_sigma = infrared_cutoff(kernel, params.sigma)
    h0 = assemble_H0(basis, params)
    hi = assemble_HI(basis, k_sigma)

    def point(g: float) -> dict:
        row = {"config_hash": cfg.hash, "g": g, "sigma": params.sigma}
        try:
            rep = ground_state(csr_matrix(h0 + g * hi), tol=cfg.tol, seed=cfg.seed)
        except SolverError as exc:
            row.update(
                energy=float("nan"),
                overlap=float("nan"),
                deficiency_heavy=float("nan"),
                deficiency_neutrino=float("nan"),
                residual=exc.best_residual,
                status="solver-error",
            )
            return row
        row.update(
            energy=rep.energy,
            residual=rep.residual,
            status="ok",
            **_overlap_diagnostics(basis, params, cfg.lam, rep.vector),
        )
        return row

    rows = _scan_map(point, cfg.scan["g"], threads)
    _write_csv(out, GS_COLUMNS, rows)
    _write_metadata(out + ".meta.json", cfg, "gs-scan", GS_COLUMNS)
    return EXIT_OK


def cmd_ir_scan(cfg: RunConfig, out: str, threads: int) -> int:
    if "sigma" not in cfg.scan:
        raise ConfigurationError("ir-scan needs a nonempty scan.sigma list")
    _, basis, kernel = build_all(cfg)
    params = cfg.params
    g = params.g
    h0 = assemble_H0(basis, params)
    e0 = state_energies(basis, params)
    ir = {j: ir_weighted_integral(kernel, j) for j in (2, 3)}
    n_diag = {j: number_operator(basis, j).diagonal().real for j in (2, 3)}

    def point(sigma: float) -> dict:
        row = {"config_hash": cfg.hash, "g": g, "sigma": sigma}
        k_sigma = infrared_cutoff(kernel, sigma)
        row["kernel_diff_norm"] = sum(
            kernel_difference_norms(kernel, k_sigma).values()
        )
        h_sigma = csr_matrix(h0 + g * assemble_HI(basis, k_sigma))
        try:
            rep = ground_state(h_sigma, tol=cfg.tol, seed=cfg.seed)
            decay_rep, _ = sector_ground_state(
                h_sigma, basis, (1, 1, 1), tol=cfg.tol, seed=cfg.seed
            )
        except SolverError as exc:
            row.update(
                energy=float("nan"),
                overlap=float("nan"),
                ratio_j2=float("nan"),
                ratio_j3=float("nan"),
                residual=exc.best_residual,
                status="solver-error",
            )
            return row
        diags = _overlap_diagnostics(basis, params, cfg.lam, rep.vector)
        h0_sq = float(np.linalg.norm(e0 * decay_rep.vector) ** 2)
        for j in (2, 3):
            nj = float(
                np.real(np.vdot(decay_rep.vector, n_diag[j] * decay_rep.vector))
            )
            denom = g**2 * ir[j] * h0_sq
            row[f"ratio_j{j}"] = nj / denom if denom > 0 else 0.0
        row.update(
            energy=rep.energy,
            overlap=diags["overlap"],
            residual=rep.residual,
            status="ok",
        )
        return row

    rows = _scan_map(point, cfg.scan["sigma"], threads)
    _write_csv(out, IR_COLUMNS, rows)
    _write_metadata(out + ".meta.json", cfg, "ir-scan", IR_COLUMNS)
    return EXIT_OK


def cmd_mourre(cfg: RunConfig, out: str, threads: int) -> int:
    if not cfg.windows:
        raise ConfigurationError("mourre needs a nonempty windows list")
    g_list = cfg.scan.get("g", [cfg.params.g])
    _, basis, kernel = build_all(cfg)
    a_kernel = dilation_kernel(kernel)  # rejects sharp kernels up front
    params = cfg.params
    e_max = cfg.e_max if cfg.e_max is not None else max(b for _, b in cfg.windows) + params.m4
    s_set = thresholds(params, e_max)
    h0 = assemble_H0(basis, params)
    c0 = commutator_A_H0(basis, params)
    hi = assemble_HI(basis, kernel)
    c_hi = commutator_A_HI(basis, a_kernel)

    def point(job: tuple[float, tuple[float, float]]) -> dict:
        g, delta = job
        row = {
            "config_hash": cfg.hash,
            "g": g,
            "delta_low": delta[0],
            "delta_high": delta[1],
        }
        h = csr_matrix(h0 + g * hi) if g else h0
        comm = csr_matrix(c0 + g * c_hi) if g else c0
        try:
            rec = mourre_bottom(h, comm, delta, s_set)
        except ThresholdCollisionError:
            row.update(
                beta=0.0, bottom=float("nan"), dim_window=0,
                status="threshold-collision",
            )
            return row
        row.update(
            beta=rec.beta, bottom=rec.bottom, dim_window=rec.dim_window, status="ok"
        )
        return row

    jobs = [(g, delta) for g in g_list for delta in cfg.windows]
    rows = _scan_map(point, jobs, threads)
    _write_csv(out, MOURRE_COLUMNS, rows)
    _write_metadata(out + ".meta.json", cfg, "mourre", MOURRE_COLUMNS)
    return EXIT_OK


CHECK_NAMES = (
    "algebra",
    "prop1",
    "prop2",
    "prop2bis",
    "relative-bound",
    "pull-through",
    "overlap",
    "overlap-trend",
    "cutoff-convergence",
    "mourre",
    "double-commutator",
)


def _run_checks(cfg: RunConfig) -> list:
    _, basis, kernel = build_all(cfg)
    params = cfg.params
    g_list = cfg.scan.get("g", [0.2, 0.1, 0.05, 0.025])
    sigma_list = cfg.scan.get("sigma", [0.5, 0.2, 0.05])
    seed = cfg.seed
    results = []
    for name in cfg.checks or list(CHECK_NAMES):
        if name == "algebra":
            results.extend(checks_mod.check_algebra(basis))
        elif name == "prop1":
            results.append(checks_mod.check_prop1(basis, trials=20, seed=seed))
        elif name == "prop2":
            results.append(
                checks_mod.check_prop2(basis, kernel, trials=20, seed=seed)
            )
        elif name == "prop2bis":
            results.append(checks_mod.check_prop2bis(basis, trials=20, seed=seed))
        elif name == "relative-bound":
            results.append(
                checks_mod.check_relative_bound(
                    basis, params, kernel, trials=20, seed=seed
                )
            )
        elif name == "pull-through":
            results.append(
                checks_mod.check_pull_through(
                    basis, params, kernel,
                    g=params.g or 0.05, sigma=params.sigma, seed=seed,
                )
            )
        elif name == "overlap":
            results.append(
                checks_mod.check_overlap(
                    basis, params, kernel,
                    g=params.g or 0.05, sigma=params.sigma, lam=cfg.lam, seed=seed,
                )
            )
        elif name == "overlap-trend":
            results.append(
                checks_mod.overlap_trend(
                    basis, params, kernel, tuple(g_list), params.sigma, cfg.lam,
                    seed=seed,
                )
            )
        elif name == "cutoff-convergence":
            results.append(
                checks_mod.check_cutoff_convergence(
                    basis, params, kernel,
                    g=params.g or 0.05, sigma_list=tuple(sigma_list), seed=seed,
                )
            )
        elif name == "mourre":
            windows = cfg.windows or [(params.m1 / 4, params.m1 / 2)]
            results.extend(
                checks_mod.check_mourre(
                    basis, params, kernel,
                    tuple(g for g in g_list), tuple(windows), e_max=cfg.e_max,
                )
            )
        elif name == "double-commutator":
            results.append(
                checks_mod.check_double_commutator_bounded(basis, params, kernel)
            )
        else:
            raise ConfigurationError(
                f"unknown check {name!r}; known checks: {', '.join(CHECK_NAMES)}"
            )
    return results


def cmd_verify(cfg: RunConfig, out: str | None) -> int:
    results = _run_checks(cfg)
    records = [r.as_dict() for r in results]
    for rec in records:
        rec["config_hash"] = cfg.hash
    text = json.dumps(records, indent=2, sort_keys=True, default=float)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weaklab",
        description="desk-scale numerical laboratory for a four-fermion decay model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "gs-scan", "ir-scan", "mourre", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1, help="scan worker threads")
        p.add_argument("--tol", type=float, default=None, help="override solver tol")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed, raw={**cfg.raw, "seed": args.seed})
        if args.tol is not None:
            if args.tol <= 0:
                raise ConfigurationError("tol must be positive")
            cfg = replace(cfg, tol=args.tol, raw={**cfg.raw, "tol": args.tol})
        if args.command == "build":
            return cmd_build(cfg, args.out)
        out = args.out or cfg.output
        if out is None and args.command != "verify":
            out = args.command.replace("-", "_") + ".csv"
        if args.command == "gs-scan":
            return cmd_gs_scan(cfg, out, args.threads)
        if args.command == "ir-scan":
            return cmd_ir_scan(cfg, out, args.threads)
        if args.command == "mourre":
            return cmd_mourre(cfg, out, args.threads)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        raise ConfigurationError(f"unknown command {args.command}")
    except (ConfigurationError, KernelRegularityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
