import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest
import yaml

from msfbraid.cli import main

SMALL = {
    "lattice": {"Lx": 12, "Ly": 7},
    "defects": {"d1": {"from": [2, 3], "to": [9, 3]}},
    "protocol": {"source": "shrink d1 right 2\ngrow d1 right 2\n"},
    "engine": {"tau_site": 40},
    "track_sites": [[2, 3], [9, 3]],
}


def schema(name):
    return json.loads(resources.files("msfbraid").joinpath(f"schemas/{name}.schema.json").read_text())


def write_cfg(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_spectrum(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"preset": "line"})
    code, out, _ = run(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and "zero modes: 2" in out
    o = tmp_path / "o"
    summary = json.loads((o / "summary.json").read_text())
    jsonschema.validate(summary, schema("summary"))
    assert summary["zero_mode_count"] == 2 and summary["splitting"] < 1e-8
    jsonschema.validate(json.loads((o / "metadata.json").read_text()), schema("metadata"))
    modes = read_csv(o / "modes.csv")
    assert len(modes) == 180 and set(modes[0]) == {"x", "y", "weight_0", "weight_1"}
    assert len(read_csv(o / "energies.csv")) == 180


def test_chern(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"chern": {"mu": [-1.0, 3.0], "nk": [12, 24]}})
    code, _, _ = run(["chern", "--config", cfg, "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0
    rows = read_csv(tmp_path / "chern.csv")
    assert [(r["mu"], r["nk"], r["C1"]) for r in rows] == [("-1", "12", "-1"), ("-1", "24", "-1"), ("3", "12", "0"), ("3", "24", "0")]


def test_gap_closed_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"chern": {"mu": [2.0], "nk": [24]}})
    code, _, err = run(["chern", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 3
    msg = json.loads(err)
    assert msg["error"] == "GapClosedError" and "gap closed" in msg["message"]


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"lattice": {"Lx": "big"}})
    code, _, err = run(["spectrum", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err)["message"].startswith("config error at lattice/Lx")
    assert not (tmp_path / "metadata.json").exists()


def test_protocol_error_exit_code(tmp_path, capsys):
    data = dict(SMALL, protocol={"source": "shrink d1 right 2\nshrink dX left 1\n"})
    code, _, err = run(["compile", "--config", write_cfg(tmp_path, data), "--out", str(tmp_path)], capsys)
    assert code == 2
    msg = json.loads(err)
    assert msg["error"] == "ProtocolError" and "line 2" in msg["message"]


def test_missing_config(tmp_path, capsys):
    code, _, err = run(["spectrum", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)], capsys)
    assert code == 2 and "cannot read" in err


def test_compile(tmp_path, capsys):
    code, out, _ = run(["compile", "--config", write_cfg(tmp_path, SMALL), "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and "4 events" in out
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["metadata.json", "schedule.csv"]
    rows = read_csv(tmp_path / "o" / "schedule.csv")
    assert rows[0]["site_x"] == "9" and rows[0]["t_end"] == "40"


@pytest.fixture(scope="module")
def braid_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("braid")
    data = dict(SMALL, noise={"lambda_R": 0.02}, seed=11)
    cfg = write_cfg(base, data)
    dirs = []
    for k in range(2):
        d = base / f"run{k}"
        assert main(["braid", "--config", cfg, "--out", str(d), "--quiet"]) == 0
        dirs.append(d)
    d = base / "seed12"
    assert main(["braid", "--config", cfg, "--out", str(d), "--quiet", "--seed", "12"]) == 0
    dirs.append(d)
    return dirs


def test_braid_outputs(braid_dirs):
    d = braid_dirs[0]
    names = sorted(p.name for p in d.iterdir())
    assert names == ["braid.json", "checkpoints.csv", "corr.csv", "gap.csv", "metadata.json", "schedule.csv"]
    doc = json.loads((d / "braid.json").read_text())
    jsonschema.validate(doc, schema("braid"))
    B = np.array(doc["B"])
    assert np.max(np.abs(B - np.eye(2))) < 5e-2
    assert doc["max_orthogonality_error"] <= 1e-8
    meta = json.loads((d / "metadata.json").read_text())
    jsonschema.validate(meta, schema("metadata"))
    assert meta["seed"] == 11 and meta["config"]["noise"]["lambda_R"] == 0.02
    assert meta["rng_algorithm"] == "numpy.random.PCG64"
    corr = read_csv(d / "corr.csv")
    assert float(corr[0]["C_0_1"]) == pytest.approx(1.0, abs=1e-12)


def test_identical_seeds_give_identical_bytes(braid_dirs):
    a, b, c = braid_dirs
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name
    assert (a / "braid.json").read_bytes() != (c / "braid.json").read_bytes()


def test_fuse(tmp_path, capsys):
    data = dict(SMALL, protocol={"builtin": "fuse_to_site", "defect": "d1", "target_end": "center"})
    code, _, _ = run(["fuse", "--config", write_cfg(tmp_path, data), "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "readout.json").read_text())
    jsonschema.validate(doc, schema("readout"))
    rows = read_csv(tmp_path / "fusion.csv")
    assert float(rows[0]["overlap"]) < 0.1
    assert doc["final_fidelity"] > 0.9 and doc["readout_fidelity"] > 0.9


def test_fuse_requires_single_final_site(tmp_path, capsys):
    code, _, err = run(["fuse", "--config", write_cfg(tmp_path, SMALL), "--out", str(tmp_path)], capsys)
    assert code == 2 and "single site" in err


def test_sweep_zero_disorder_cell_matches_noiseless(tmp_path, capsys):
    data = dict(SMALL, sweep={"axis": "lambda_R", "values": [0.0, 0.05]}, seed=3)
    cfg = write_cfg(tmp_path, data)
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--quiet"], capsys)[0] == 0
    rows = read_csv(tmp_path / "s" / "sweep.csv")
    assert [r["value"] for r in rows] == ["0", "0.050000000000000003"]
    assert rows[0]["seed"] != rows[1]["seed"]
    assert run(["braid", "--config", write_cfg(tmp_path, SMALL, "n.yaml"), "--out", str(tmp_path / "b"), "--quiet"], capsys)[0] == 0
    B = json.loads((tmp_path / "b" / "braid.json").read_text())["B"]
    from msfbraid.experiments import braid_deviation

    assert rows[0]["deviation"] == "%.17g" % braid_deviation(np.array(B))


def test_sweep_without_section(tmp_path, capsys):
    code, _, err = run(["sweep", "--config", write_cfg(tmp_path, SMALL), "--out", str(tmp_path)], capsys)
    assert code == 2 and "sweep" in err


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "msfbraid.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "spectrum" in out.stdout


def test_bad_command():
    with pytest.raises(SystemExit) as e:
        main(["dance", "--config", "x"])
    assert e.value.code == 2
