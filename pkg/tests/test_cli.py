import json

import pytest

from weaklab import cli
from weaklab.config import load_kernel_file, parse_config
from weaklab.errors import ConfigurationError, KernelFormatError


def write_config(path, **overrides):
    raw = {
        "params": {"m1": 1.0, "m4": 2.0, "g": 0.05},
        "n_max": 3,
        "kernel": {"preset": "smooth-gaussian", "lambda_uv": 1.0},
        "lambda": 0.5,
        "seed": 0,
    }
    raw.update(overrides)
    path.write_text(json.dumps(raw))
    return raw


def test_parse_config_errors():
    with pytest.raises(ConfigurationError):
        parse_config({"kernel": {"preset": "nope"}})
    with pytest.raises(ConfigurationError):
        parse_config({"scan": {"g": []}})
    with pytest.raises(ConfigurationError):
        parse_config({"windows": [[2.0, 1.0]]})
    with pytest.raises(ConfigurationError):
        parse_config({"params": {"m1": 1.0}})  # missing required fields


def test_build_reports_dims(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    # minimal 8-mode configuration, untruncated
    write_config(
        cfg,
        n_max=8,
        grid={str(s): [{"p": [0, 0, 0.5], "w": 1.0}] for s in (1, 2, 3, 4)},
        spins={"1": [0.5], "2": [1.0], "3": [1.0], "4": [0.5]},
    )
    assert cli.main(["build", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "basis dim        256" in out


def test_build_32_mode_nmax2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    # 2 nodes x full spin domains x 2 charges x 4 species = 32 modes
    write_config(
        cfg,
        n_max=2,
        grid={
            str(s): [{"p": [0, 0, 0.4], "w": 0.5}, {"p": [0, 0, 0.8], "w": 0.5}]
            for s in (1, 2, 3, 4)
        },
        spins={"1": [-0.5, 0.5], "2": [-1, 1], "3": [-1, 1], "4": [-0.5, 0.5]},
    )
    assert cli.main(["build", "--config", str(cfg)]) == 0
    assert "basis dim        529" in capsys.readouterr().out


def test_gs_scan_g_zero_row(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"g": [0.0]})
    out = tmp_path / "gs.csv"
    assert cli.main(["gs-scan", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    row = dict(zip(header, lines[1].split(",")))
    assert float(row["energy"]) == 0.0
    assert float(row["overlap"]) == 1.0
    assert row["status"] == "ok"
    assert len(row["config_hash"]) == 16
    meta = json.loads((tmp_path / "gs.csv.meta.json").read_text())
    assert meta["config_hash"] == row["config_hash"]
    assert "timestamp" in meta


def test_gs_scan_symmetric_g(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"g": [-0.1, 0.1]})
    out = tmp_path / "gs.csv"
    assert cli.main(["gs-scan", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    e = [float(line.split(",")[3]) for line in lines[1:]]
    assert abs(e[0] - e[1]) < 1e-10


def test_determinism_byte_identical(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"g": [0.1, 0.05]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["gs-scan", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["gs-scan", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_ir_scan_rows(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"sigma": [0.9, 0.5, 0.3]})
    out = tmp_path / "ir.csv"
    assert cli.main(["ir-scan", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    # sigma beyond the grid kills the interaction: E = 0 exactly
    assert float(rows[0]["energy"]) == 0.0
    for row in rows:
        assert float(row["energy"]) <= 1e-12


def test_mourre_scan_and_sharp_rejection(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"g": [0.0, 0.05]}, windows=[[2.2, 2.3], [1.9, 2.1]])
    out = tmp_path / "m.csv"
    assert cli.main(["mourre", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    rows = [dict(zip(lines[0].split(","), line.split(","))) for line in lines[1:]]
    collisions = [r for r in rows if r["status"] == "threshold-collision"]
    assert len(collisions) == 2  # window [1.9, 2.1] hits the threshold at 2
    # sharp kernel: command-level rejection with config exit code
    write_config(cfg, kernel={"preset": "sharp", "lambda_uv": 1.0}, windows=[[2.2, 2.3]])
    assert cli.main(["mourre", "--config", str(cfg), "--out", str(out)]) == 2


def test_verify_exit_codes(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, checks=["algebra"], n_max=2)
    report = tmp_path / "v.json"
    assert cli.main(["verify", "--config", str(cfg), "--out", str(report)]) == 0
    records = json.loads(report.read_text())
    assert all(r["passed"] for r in records)
    write_config(cfg, checks=["not-a-check"], n_max=2)
    assert cli.main(["verify", "--config", str(cfg)]) == 2


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli.main(["build", "--config", str(cfg)]) == 2
    assert cli.main(["build", "--config", str(tmp_path / "missing.json")]) == 2


def test_threads_match_serial(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, scan={"g": [0.1, 0.05, 0.0]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["gs-scan", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(
        ["gs-scan", "--config", str(cfg), "--out", str(b), "--threads", "3"]
    ) == 0
    assert a.read_bytes() == b.read_bytes()


KERNEL_FILE = """
# two nodes per sector, single spins
sector 1 1
node 0 0 0.4 0.5 0.5
node 0 0 0.8 0.5 0.5
sector 1 -1
node 0 0 0.4 0.5 0.5
node 0 0 0.8 0.5 0.5
sector 2 1
node 0 0 0.4 1.0 0.5
node 0 0 0.8 1.0 0.5
sector 2 -1
node 0 0 0.4 1.0 0.5
node 0 0 0.8 1.0 0.5
sector 3 1
node 0 0 0.4 1.0 0.5
node 0 0 0.8 1.0 0.5
sector 3 -1
node 0 0 0.4 1.0 0.5
node 0 0 0.8 1.0 0.5
sector 4 1
node 0 0 0.4 0.5 0.5
node 0 0 0.8 0.5 0.5
sector 4 -1
node 0 0 0.4 0.5 0.5
node 0 0 0.8 0.5 0.5
channel 1 -1
entry 0 0 0 0 1.0 0.0
entry 1 0 1 1 0.5 -0.5
"""


def test_kernel_file_roundtrip(tmp_path):
    path = tmp_path / "k.txt"
    path.write_text(KERNEL_FILE)
    table, kernel = load_kernel_file(str(path))
    assert table.n_modes == 16
    t = kernel.channels[(1, -1)]
    assert t[0, 0, 0, 0] == 1.0
    assert t[1, 0, 1, 1] == 0.5 - 0.5j
    assert t[0, 1, 0, 0] == 0.0  # unspecified entries default to 0


def test_kernel_file_errors(tmp_path):
    path = tmp_path / "k.txt"
    path.write_text("node 0 0 0.4 0.5 0.5\n")
    with pytest.raises(KernelFormatError, match=":1:"):
        load_kernel_file(str(path))
    path.write_text(KERNEL_FILE + "entry 9 0 0 0 1 0\n")
    with pytest.raises(KernelFormatError, match="out of range"):
        load_kernel_file(str(path))
    path.write_text(KERNEL_FILE.replace("channel 1 -1", "channel 1 1"))
    with pytest.raises(KernelFormatError, match="channel"):
        load_kernel_file(str(path))


def test_kernel_file_via_cli(tmp_path, capsys):
    kpath = tmp_path / "k.txt"
    kpath.write_text(KERNEL_FILE)
    cfg = tmp_path / "c.json"
    write_config(
        cfg,
        kernel={"preset": "file", "path": str(kpath)},
        grid={
            str(s): [{"p": [0, 0, 0.4], "w": 0.5}, {"p": [0, 0, 0.8], "w": 0.5}]
            for s in (1, 2, 3, 4)
        },
        spins={"1": [0.5], "2": [1.0], "3": [1.0], "4": [0.5]},
    )
    assert cli.main(["build", "--config", str(cfg)]) == 0
    assert "basis dim" in capsys.readouterr().out
    # grid mismatch between config and kernel file is a config error
    write_config(
        cfg,
        kernel={"preset": "file", "path": str(kpath)},
        grid={str(s): [{"p": [0, 0, 0.4], "w": 0.5}] for s in (1, 2, 3, 4)},
        spins={"1": [0.5], "2": [1.0], "3": [1.0], "4": [0.5]},
    )
    assert cli.main(["build", "--config", str(cfg)]) == 2
