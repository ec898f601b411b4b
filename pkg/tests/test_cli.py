import json

import numpy as np
import pytest

from mubtomo.cli import main
from mubtomo.mubs import MubSet
from mubtomo.reconstruct import ReconstructionResult
from mubtomo.simulate import Dataset


def run(*args):
    return main([str(a) for a in args])


def test_mub_d3(tmp_path, capsys):
    out = tmp_path / "m3.json"
    assert run("mub", "--dim", 3, "--out", out) == 0
    s = MubSet.from_json(out.read_text())
    assert len(s.bases) == 4
    cert = json.loads((tmp_path / "m3.json.cert.json").read_text())
    assert cert["passed"] and cert["worst_deviation"] < 1e-12
    assert "PASS" in capsys.readouterr().out


def test_mub_unsupported_dimension(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("mub", "--dim", 7, "--out", tmp_path / "x.json")
    assert exc.value.code == 1
    assert not (tmp_path / "x.json").exists()


def test_mub_repeatable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("mub", "--dim", 5, "--out", a)
    run("mub", "--dim", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors_exit_one(tmp_path):
    for argv in (["bogus"], [], ["plan", "--dim", "2"], ["simulate", "--dim", "2", "--out", "x",
                                                       "--plan", "triangle"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1


def test_plan_report(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert run("plan", "--dim", 2, "--plan", "overcomplete", "--out", out) == 0
    assert len(out.read_text().splitlines()) == 2 + 36
    report = json.loads((tmp_path / "p.csv.completeness.json").read_text())
    assert report["complete"] and report["shape"] == [36, 16]


@pytest.mark.parametrize("d, kind, rows", [(2, "complete", 16), (5, "overcomplete", 900)])
def test_simulate_record_count(tmp_path, capsys, d, kind, rows):
    out = tmp_path / "d.txt"
    assert run("simulate", "--dim", d, "--plan", kind, "--out", out) == 0
    assert len(Dataset.from_text(out.read_text())) == rows
    assert "mean quantum contrast" in capsys.readouterr().out


def test_simulate_fixed_seed_identical(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run("simulate", "--dim", 3, "--seed", 4, "--width", 2, "--out", a)
    run("simulate", "--dim", 3, "--seed", 4, "--width", 2, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_invalid_parameters(tmp_path):
    assert run("simulate", "--dim", 2, "--efficiency-a", 2, "--out", tmp_path / "x") == 1
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--dim", 2, "--width", 0, "--out", tmp_path / "x")
    assert exc.value.code == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 9, "pair_rate": 1e6, "integration": 2.0}))
    out = tmp_path / "d.txt"
    assert run("simulate", "--dim", 2, "--config", cfg, "--seed", 3, "--out", out) == 0
    data = Dataset.from_text(out.read_text())
    assert data.seed == 3 and data.integration_time == 2.0


def test_reconstruct_noiseless_maxent(tmp_path, capsys):
    data = tmp_path / "d.txt"
    res = tmp_path / "r.json"
    run("simulate", "--dim", 2, "--pair-rate", 1e7, "--integration", 100, "--out", data)
    assert run("reconstruct", "--in", data, "--out", res) == 0
    result = ReconstructionResult.from_json(res.read_text())
    assert result.fidelity >= 0.99
    np.testing.assert_allclose(np.trace(result.rho), 1.0, atol=1e-12)
    assert "F=" in capsys.readouterr().out


def test_reconstruct_dimension_mismatch(tmp_path, capsys):
    data = tmp_path / "d.txt"
    run("simulate", "--dim", 2, "--out", data)
    assert run("reconstruct", "--in", data, "--dim", 3, "--out", tmp_path / "r.json") == 1
    assert run("reconstruct", "--in", data, "--plan", "overcomplete",
               "--out", tmp_path / "r.json") == 1
    assert "d=2" in capsys.readouterr().err


def test_reconstruct_bootstrap(tmp_path):
    data = tmp_path / "d.txt"
    res = tmp_path / "r.json"
    run("simulate", "--dim", 2, "--pair-rate", 2e5, "--out", data)
    assert run("reconstruct", "--in", data, "--bootstrap", 50, "--restarts", 1,
               "--out", res) == 0
    result = ReconstructionResult.from_json(res.read_text())
    assert result.sigma_f > 0 and result.sigma_s > 0


def test_reconstruct_io_errors(tmp_path):
    assert run("reconstruct", "--in", tmp_path / "missing.txt", "--out", tmp_path / "r") == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("not a dataset\n")
    assert run("reconstruct", "--in", bad, "--out", tmp_path / "r") == 1


def test_reconstruct_rejects_dataset_not_matching_plan(tmp_path):
    # rows only cover the computational basis, so they cannot align with the complete plan
    rows = "\n".join(f"1,{i},1,{j},100,1000,1000" for i in (1, 2) for j in (1, 2))
    path = tmp_path / "c.txt"
    path.write_text("# dim=2\n# kind=complete\n# gate_time=1e-08\n# integration_time=1.0\n"
                    "m,i,n,j,C,A,B\n" + rows + "\n")
    assert run("reconstruct", "--in", path, "--out", tmp_path / "r.json") == 1


@pytest.mark.parametrize("d, mubs, qst", [(2, 16, 36), (3, 81, 225), (4, 256, 784)])
def test_compare_counts(tmp_path, capsys, d, mubs, qst):
    out = tmp_path / "c.json"
    assert run("compare", "--dim", d, "--out", out) == 0
    table = json.loads(out.read_text())
    assert (table["M_MUBs"], table["M_QST"]) == (mubs, qst)
    assert f"M_MUBs={mubs}" in capsys.readouterr().out


def test_compare_with_datasets(tmp_path, capsys):
    paths = []
    for kind in ("complete", "overcomplete"):
        p = tmp_path / f"{kind}.txt"
        run("simulate", "--dim", 2, "--plan", kind, "--out", p)
        paths += ["--in", p]
    out = tmp_path / "c.json"
    assert run("compare", "--dim", 2, *paths, "--out", out) == 0
    table = json.loads(out.read_text())
    assert [e["M"] for e in table["datasets"]] == [16, 36]
    assert all(0 <= e["F"] <= 1 and 0 <= e["S"] <= 0.75 for e in table["datasets"])


def test_compare_missing_dataset(tmp_path):
    assert run("compare", "--dim", 2, "--in", tmp_path / "nope", "--out", tmp_path / "c") == 3


@pytest.mark.parametrize("d, pairs", [(3, 12), (5, 30)])
def test_render_all_modes(tmp_path, d, pairs):
    assert run("render", "--dim", d, "--size", 32, "--out", tmp_path) == 0
    assert len(list(tmp_path.glob("*_intensity.pgm"))) == pairs
    assert len(list(tmp_path.glob("*_phase.ppm"))) == pairs
    assert len(list(tmp_path.glob("*.json"))) == pairs


def test_render_single_mode_and_bad_indices(tmp_path):
    assert run("render", "--dim", 3, "--m", 2, "--i", 1, "--gray-phase", "--size", 16,
               "--out", tmp_path) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "d3_m2_i1.json", "d3_m2_i1_intensity.pgm", "d3_m2_i1_phase.pgm"]
    assert run("render", "--dim", 3, "--i", 4, "--out", tmp_path) == 1
    assert run("render", "--dim", 3, "--m", 5, "--out", tmp_path) == 1


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_pipeline_end_to_end(tmp_path, d):
    assert run("mub", "--dim", d, "--out", tmp_path / "mub.json") == 0
    assert run("plan", "--dim", d, "--out", tmp_path / "plan.csv") == 0
    assert run("simulate", "--dim", d, "--width", 2.5, "--seed", 1,
               "--out", tmp_path / "data.txt") == 0
    assert run("reconstruct", "--in", tmp_path / "data.txt", "--restarts", 1,
               "--out", tmp_path / "res.json") == 0
    result = ReconstructionResult.from_json((tmp_path / "res.json").read_text())
    assert result.rho.shape == (d * d, d * d)
    assert result.fidelity > 0.8
