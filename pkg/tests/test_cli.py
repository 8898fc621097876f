import json
from datetime import datetime

import pytest
from click.testing import CliRunner

from app.api.cli import cli, run
from app.logs.run_logger import LocalRunLogger
from app.mesh.io import load_mesh4
from app.mesh.trimesh import genus
from app.orchestrator.experiment_orchestrator import ExperimentOrchestrator
from app.presets.preset_registry import PresetRegistry


@pytest.fixture
def invoke(tmp_path):
    runner = CliRunner()

    def _invoke(*args):
        result = runner.invoke(cli, ["--output-dir", str(tmp_path), *args])
        payload = json.loads(result.stdout) if result.stdout.strip().startswith("{") else None
        return result, payload

    return _invoke


def _manifest(tmp_path, payload):
    return json.loads((tmp_path / payload["run_id"] / "manifest.json").read_text(encoding="utf-8"))


def test_groups_command(invoke, tmp_path):
    result, payload = invoke("groups", "--m", "2", "--k", "1")
    assert result.exit_code == 0
    assert payload["status"] == "success"
    assert all(row["ok"] for row in payload["data"]["groups"])
    assert all(edge["ok"] for edge in payload["data"]["lattice"])
    assert payload["data"]["quotients"]["G_tilde/R"]["order"] == 4
    assert payload["data"]["quotients"]["G_hat/R"]["elementary_abelian_2"] is True
    assert payload["data"]["full_order_element"] is True

    manifest = _manifest(tmp_path, payload)
    assert manifest["command"] == "groups"
    assert manifest["config"]["m"] == 2
    assert "groups" in manifest["outputs"]
    assert {t["stage"] for t in manifest["stage_timings"]} >= {"validation", "orders", "lattice"}
    assert list(tmp_path.glob("*/*/groups-*.json"))


def test_orbifold_classify(invoke):
    result, payload = invoke("orbifold", "classify", "--m", "2", "--k", "1", "--g", "2")
    assert result.exit_code == 0
    assert payload["data"]["patterns"] == [
        {"g_hat": 0, "v1": 2, "v2": 2, "boundary": False, "chi_orbifold": "-1/3"}
    ]


def test_orbifold_classify_empty_genus(invoke):
    result, payload = invoke("orbifold", "classify", "--m", "3", "--k", "1", "--g", "2")
    assert result.exit_code == 0
    assert payload["data"]["patterns"] == []


def test_orbifold_table_csv(invoke, tmp_path):
    result, payload = invoke("orbifold", "table", "--max-m", "3", "--max-k", "2", "--format", "csv")
    assert result.exit_code == 0
    assert payload["data"]["table"].splitlines()[0].startswith("m,k,mk,feasible")
    assert len(payload["data"]["rows"]) == 5
    assert (tmp_path / payload["run_id"] / "orbifold_table.csv").exists()


def test_tiling_command(invoke):
    result, payload = invoke("--seed", "11", "tiling", "--m", "2", "--k", "1", "--samples", "2000")
    assert result.exit_code == 0
    data = payload["data"]
    assert data["tiles"] == 24
    assert data["cover"]["ok"] and data["fundamental_domain"]["ok"]
    assert data["permutations"]["gamma_0,0"]["parity_preserving"]
    assert data["permutations"]["Sigma_P0"]["parity_reversing"]


def test_precondition_failure_exits_nonzero(invoke, tmp_path):
    result, payload = invoke("orbifold", "classify", "--m", "2", "--k", "1", "--g", "5")
    assert result.exit_code == 1
    assert payload["status"] == "failure"
    assert payload["stage"] == "classify"
    assert payload["issues"][0]["error"] == "PreconditionError"
    assert _manifest(tmp_path, payload)["status"] == "failure"


def test_validation_failure(invoke):
    result, payload = invoke("plateau", "--m", "1", "--k", "2")
    assert result.exit_code == 1
    assert payload["stage"] == "validation"
    assert payload["issues"][0]["error"] == "ValidationError"


def test_unknown_subcommand(invoke):
    result, payload = invoke("nonsense")
    assert result.exit_code != 0
    assert payload is None


def test_flow_needs_one_config_source(invoke, tmp_path):
    result, _ = invoke("flow")
    assert result.exit_code == 2
    path = tmp_path / "flow.toml"
    path.write_text('source = "sphere"\n', encoding="utf-8")
    result, _ = invoke("flow", "--config", str(path), "--preset", "sphere_flow")
    assert result.exit_code == 2


def test_unreadable_flow_config(invoke, tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("source = [", encoding="utf-8")
    result, payload = invoke("flow", "--config", str(path))
    assert result.exit_code == 1
    assert payload["stage"] == "config"
    assert payload["issues"][0]["error"] == "ValueError"


def test_sphere_flow_run(invoke, tmp_path):
    path = tmp_path / "flow.toml"
    path.write_text(
        'source = "sphere"\nsphere_level = 1\ngenerators = ["1"]\nperturbation = 0.01\n'
        "diagnostics_every = 1\n\n[stop]\nmax_iters = 3\n",
        encoding="utf-8",
    )
    result, payload = invoke("--seed", "7", "flow", "--config", str(path))
    assert result.exit_code == 0
    assert payload["data"]["monotone"] is True
    assert payload["data"]["group_order"] == 1

    run_dir = tmp_path / payload["run_id"]
    header = (run_dir / "trace.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "iter,W,area,grad_norm,min_edge,neck,sym_dev"
    assert (run_dir / "final.npz").exists()
    manifest = _manifest(tmp_path, payload)
    assert manifest["seed"] == 7
    assert manifest["config"]["step"]["armijo"] == 1e-4
    assert manifest["config"]["stop"]["max_iters"] == 3


def test_build_lawson_writes_mesh_and_sidecar(invoke, tmp_path):
    out = tmp_path / "meshes" / "xi11.off"
    result, payload = invoke("build-lawson", "--m", "1", "--k", "1", "--n", "8", "--out", str(out))
    assert result.exit_code == 0
    assert payload["data"]["verification"]["ok"] is True
    assert payload["data"]["centers"]["counts"] == {"A+": 4, "A-": 4}
    assert out.with_suffix(".csv").exists()
    assert genus(load_mesh4(out)) == 1
    assert (tmp_path / payload["run_id"] / "report.json").exists()


def test_export_command(invoke, tmp_path):
    out_dir = tmp_path / "export"
    result, payload = invoke(
        "export", "--m", "1", "--k", "1", "--n", "8", "--variant", "dual",
        "--pole", "0", "0", "0", "1", "--out-dir", str(out_dir),
    )
    assert result.exit_code == 0
    assert {p.name for p in out_dir.iterdir()} == {"xi_1_1_dual.off", "xi_1_1_dual.obj", "xi_1_1_dual.csv"}


def test_run_returns_exit_codes(tmp_path):
    assert run(["nonsense"]) != 0
    assert run(["--output-dir", str(tmp_path), "orbifold", "classify", "--m", "2", "--k", "1", "--g", "5"]) == 1
    assert run(["--output-dir", str(tmp_path), "orbifold", "classify", "--m", "2", "--k", "1", "--g", "2"]) == 0


def test_orchestrator_rejects_unknown_commands(tmp_path):
    orchestrator = ExperimentOrchestrator(run_logger=LocalRunLogger(tmp_path))
    assert "build-lawson" in orchestrator.commands
    payload = orchestrator.run("nonsense", {})
    assert payload["status"] == "failure"
    assert payload["issues"][0]["error"] == "UnknownCommand"


def test_preset_registry():
    preset = PresetRegistry.get("clifford_flow")
    assert preset["version"] == "v1"
    config = PresetRegistry.flow_config("neck_probe")
    assert config["generators"] == ["gamma_0,0", "R_Q"]
    with pytest.raises(KeyError):
        PresetRegistry.get("clifford_flow", "v9")


def test_run_logger_paths(tmp_path):
    logger = LocalRunLogger(tmp_path)
    stamp = datetime(2025, 11, 27, 13, 5, 9)
    assert logger.path_for("run", stamp) == tmp_path / "Nov 2025" / "27-11-2025" / "run_13-05-09.json"
    path = logger.log("run", {"value": 1})
    assert path is not None and path.exists()
    assert json.loads(path.read_text(encoding="utf-8")) == {"value": 1}
