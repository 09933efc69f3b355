from __future__ import annotations

import json
import math

import jsonschema
import pytest

from brownexit.cli import _schema, main
from brownexit.conformal import HansenSpiral, Koebe, map_from_dict
from brownexit.geometry import Disk, HalfPlane, MobiusImage, SpiralComplement, SpiralSector, Union, Wedge
from brownexit.plcheck import BoundedRational, ExpPower, Polynomial


@pytest.fixture
def specs(tmp_path):
    files = {
        "disk": {"type": "disk", "center": [0, 0], "radius": 1},
        "wedge": {"type": "wedge", "half_angle": math.pi / 4},
        "hp_pos": {"type": "half_plane", "boundary_point": [0, 0], "inward_normal_angle": 0},
        "hp_lt1": {"type": "half_plane", "boundary_point": [1, 0], "inward_normal_angle": math.pi},
        "koebe": {"type": "koebe"},
        "expz2": {"type": "exp_power", "gamma": 2},
        "bad": {"type": "disk", "radius": -3},
    }
    out = {}
    for name, obj in files.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(obj))
        out[name] = str(p)
    return out


def _run(args, out):
    return main(args + ["--out", str(out)])


def _validate(path):
    rec = json.loads(path.read_text())
    jsonschema.validate(rec, _schema())
    return rec


def test_moment_csv(specs, tmp_path):
    assert _run(["moment", "--domain", specs["disk"], "--p", "1.0", "--samples", "100000", "--seed", "7"],
                tmp_path / "a") == 0
    lines = (tmp_path / "a" / "moment.csv").read_text().splitlines()
    header = dict(l[2:].split("=", 1) for l in lines if l.startswith("# "))
    assert {"seed", "samples", "eps_shell", "max_steps", "cap", "domain", "start", "p"} <= set(header)
    assert "workers" not in header
    cols = [l for l in lines if not l.startswith("#")]
    assert cols[0] == "p,mean,std_err,ci_lo,ci_hi,censored,divergent_flag"
    assert float(cols[1].split(",")[1]) == pytest.approx(0.5, rel=0.01)


def test_byte_identical_across_runs_and_workers(specs, tmp_path):
    args = ["sweep", "--domain", specs["wedge"], "--start", "1,0", "--p-grid", "0.25,0.5",
            "--samples", "60000", "--seed", "3"]
    blobs = []
    for i, w in enumerate((1, 1, 2)):
        d = tmp_path / str(i)
        assert _run(args + ["--workers", str(w)], d) == 0
        blobs.append((d / "sweep.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_json_outputs_validate(specs, tmp_path):
    runs = {
        "moment": ["moment", "--domain", specs["disk"], "--p", "0.5", "--samples", "2000"],
        "sweep": ["sweep", "--domain", specs["disk"], "--p-grid", "0.5,1", "--samples", "2000"],
        "tail": ["tail", "--domain", specs["hp_pos"], "--samples", "5000"],
        "harmonic": ["harmonic", "--samples", "2000", "--points", "0,1;1,1"],
        "hardy": ["hardy", "--map", specs["koebe"], "--two-p", "0.4"],
        "plcheck": ["plcheck", "--function", specs["expz2"], "--domain", specs["wedge"], "--p", "1.0",
                    "--n-interior", "3000"],
    }
    for name, args in runs.items():
        d = tmp_path / name
        assert _run(args + ["--format", "json"], d) == 0, name
        rec = _validate(d / f"{name}.json")
        assert rec["command"] == name and rec["schema_version"] == "1.0"
    assert json.loads((tmp_path / "hardy" / "hardy.json").read_text())["verdict"] == "finite"
    assert (tmp_path / "hardy" / "radial_trace.csv").exists()
    rec = json.loads((tmp_path / "plcheck" / "plcheck.json").read_text())
    assert rec["verdict"]["conclusion"] == "hypothesis-unmet"


def test_glue_negative_control(specs, tmp_path):
    assert _run(["glue", "--v", specs["hp_pos"], "--w", specs["hp_lt1"], "--p", "0.4", "--grid-n", "4",
                 "--budget", "2000"], tmp_path) == 0
    rec = _validate(tmp_path / "glue.json")
    assert rec["report"]["verdict"] == "failed(iii)"
    assert (tmp_path / "glue_grid.csv").read_text().startswith("a_re,a_im,p_hat,ci_hi,moment_hat")


def test_exit_statuses(specs, tmp_path):
    assert _run(["moment", "--domain", specs["bad"], "--p", "1"], tmp_path / "bad") == 2
    rec = _validate(tmp_path / "bad" / "error.json")
    assert rec["exit_status"] == 2 and rec["command"] == "error"
    assert _run(["moment", "--domain", specs["disk"], "--p", "1", "--start", "3,0"], tmp_path / "out") == 2
    assert _run(["moment", "--domain", specs["disk"]], tmp_path / "noarg") == 2
    assert _run(["moment", "--domain", specs["hp_pos"], "--p", "0.2", "--samples", "200", "--max-steps", "2"],
                tmp_path / "budget") == 3
    rec = _validate(tmp_path / "budget" / "error.json")
    assert rec["error"] == "max_steps_exceeded" and rec["exit_status"] == 3


def test_demo_subcommand(tmp_path, capsys):
    assert main(["demo", "--criteria", "1,6", "--out", str(tmp_path), "--format", "json", "--seed", "7"]) == 0
    rec = _validate(tmp_path / "demo.json")
    assert [c["number"] for c in rec["criteria"]] == [1, 6]
    assert "[PASS]  1" in capsys.readouterr().out
    assert main(["demo", "--criteria", "99", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("obj", [Disk(1 + 1j, 2.0), HalfPlane(1j, 0.3), Wedge(0.5), SpiralSector(0.3, 0.0, 2.0),
                                 SpiralComplement(0.2, 1.0, (0.0, 3.0)), Union((Disk(), Wedge(0.5))),
                                 MobiusImage(Disk(), 1.0, 2.0, 0.0, 1.0)])
def test_domain_schema_accepts_serialised_domains(obj):
    jsonschema.validate(obj.to_dict(), _schema("domain"))


def test_map_and_function_schemas():
    for f in (Koebe(), HansenSpiral(0.2, 1.0, 0.1), map_from_dict({"type": "composed", "map": {"type": "koebe"},
                                                                    "b": [0.1, 0.2]})):
        jsonschema.validate(f.to_dict(), _schema("map"))
    for g in (ExpPower(2.0), Polynomial((1.0, 2.0)), BoundedRational((1.0,), (2.0, 1.0))):
        jsonschema.validate(g.to_dict(), _schema("function"))
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"type": "disk", "radius": 0}, _schema("domain"))
