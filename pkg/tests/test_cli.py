import json

import numpy as np
import pytest

from symtree.cli import run
from symtree.config import DEFAULTS, load_config
from symtree.errors import ConfigError
from symtree.learner import Dataset
from symtree.reference import reference_model
from symtree.tree import deserialize, serialize


def test_defaults_are_canonical():
    cfg = load_config(None)
    assert cfg["mpc"]["T"] == 10 and cfg["mpc"]["h"] == 0.5
    assert cfg["learn"]["depth"] == 2
    assert cfg["learn"]["lambda_c"] == 1e-2
    assert cfg["learn"]["lambda_m"] == 1e-4
    assert cfg["data"]["n_train"] == 50 and cfg["data"]["range"] == [0.1, 0.9]
    spec = cfg.mpc_spec()
    assert spec.plant.V == 50.0 and spec.x_sp == 0.6
    lc = cfg.learn_config()
    assert (lc.c_lb, lc.c_ub) == (-1000.0, 1000.0)
    assert lc.big_M == 1000.0


def test_unknown_keys_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"plant": {"volume": 50}}))
    with pytest.raises(ConfigError):
        load_config(str(bad))
    bad.write_text(json.dumps({"reactor": {}}))
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_config_hash_stable_and_sensitive(tmp_path):
    a = load_config(None).config_hash()
    assert a == load_config(None).config_hash()
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mpc": {"T": 12}}))
    assert load_config(str(p)).config_hash() != a


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny end-to-end CLI run shared by the tests below."""
    ws = tmp_path_factory.mktemp("cli")
    cfg = ws / "cfg.json"
    cfg.write_text(json.dumps({"data": {"n_train": 6, "n_test": 4},
                               "sim": {"t_final": 1.0}}))
    assert run(["gen-data", "--config", str(cfg), "--out-dir", str(ws)]) == 0
    return ws, cfg


def test_gen_data_outputs(workspace):
    ws, cfg = workspace
    train = Dataset.from_csv((ws / "train.csv").read_text())
    assert train.n_points == 6
    meta = json.loads((ws / "datasets.json").read_text())
    assert meta["train_sha256"] == train.sha256()
    assert meta["provenance"]["config_hash"] == load_config(str(cfg)).config_hash()


def test_gen_data_reproducible(workspace, tmp_path):
    ws, cfg = workspace
    assert run(["gen-data", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "train.csv").read_text() == (ws / "train.csv").read_text()
    assert (tmp_path / "test.csv").read_text() == (ws / "test.csv").read_text()


def test_train_and_predict(workspace, capsys):
    ws, cfg = workspace
    out = ws / "model.tree.json"
    assert run(["train", "--config", str(cfg), "--data", str(ws / "train.csv"),
                "--out", str(out)]) == 0
    model = deserialize(out.read_text())
    report = json.loads((ws / "model.report.json").read_text())
    assert report["kind"] == "symbolic"
    assert report["provenance"]["dataset_sha256"]
    capsys.readouterr()
    assert run(["predict", "--model", str(out), "--x", "0.6"]) == 0
    printed = float(capsys.readouterr().out.strip())
    assert 0.0 <= printed <= 100.0


def test_baselines_and_report(workspace, capsys):
    ws, cfg = workspace
    reports = [str(ws / "model.report.json")]
    for kind in ["sparse", "cart", "lintree"]:
        out = ws / f"{kind}.tree.json"
        assert run(["baseline", "--kind", kind, "--config", str(cfg),
                    "--data", str(ws / "train.csv"), "--out", str(out)]) == 0
        reports.append(str(ws / f"{kind}.report.json"))
    capsys.readouterr()
    assert run(["report", "--test", str(ws / "test.csv"),
                "--reports", *reports, "--out", str(ws / "cmp.json")]) == 0
    cmp_doc = json.loads((ws / "cmp.json").read_text())
    assert len(cmp_doc["models"]) == 4
    maes = [m["test_mae"] for m in cmp_doc["models"]]
    assert maes == sorted(maes)


def test_report_refuses_mixed_datasets(workspace, tmp_path, capsys):
    ws, cfg = workspace
    tampered = json.loads((ws / "sparse.report.json").read_text())
    tampered["provenance"]["dataset_sha256"] = "0" * 64
    alt = tmp_path / "sparse.report.json"
    alt.write_text(json.dumps(tampered))
    (tmp_path / "sparse.tree.json").write_text((ws / "sparse.tree.json").read_text())
    code = run(["report", "--test", str(ws / "test.csv"),
                "--reports", str(ws / "model.report.json"), str(alt),
                "--out", str(tmp_path / "cmp.json")])
    assert code == 2
    assert "different datasets" in capsys.readouterr().err


def test_export_milp_counts(workspace):
    ws, cfg = workspace
    out = ws / "prob.mps"
    assert run(["export-milp", "--config", str(cfg),
                "--data", str(ws / "train.csv"), "--out", str(out)]) == 0
    counts = json.loads((ws / "prob.counts.json").read_text())
    # N_d = 6, N_f = 1, D = 2, N_K = 19
    assert counts["n_binary"] == 7 * 7 + 3
    assert (ws / "prob.names.json").exists()


def test_import_solution_round_trip(workspace):
    ws, cfg = workspace
    model = deserialize((ws / "model.tree.json").read_text())
    from symtree.basis import canonical_basis
    from symtree.milp import build_milp, node_sets
    from symtree.tree import BRANCH, route

    data = Dataset.from_csv((ws / "train.csv").read_text())
    lcfg = load_config(str(cfg)).learn_config()
    nn, _, internal = node_sets(lcfg.depth)
    lines = []
    for n in nn:
        lines.append(f"d[{n}] {1 if model.topology.kinds[n] == BRANCH else 0}")
    for n in internal:
        lines.append(f"a[1,{n}] {1 if n in model.rules else 0}")
        if n in model.rules:
            lines.append(f"b[{n}] {model.rules[n].threshold!r}")
    for i in range(1, data.n_points + 1):
        leaf = route(model, data.X[i - 1])
        for n in nn:
            lines.append(f"z[{i},{n}] {1 if n == leaf else 0}")
    sol = ws / "fit.sol"
    sol.write_text("\n".join(lines) + "\n")
    out = ws / "imported.tree.json"
    assert run(["import-sol", "--config", str(cfg), "--data",
                str(ws / "train.csv"), "--sol", str(sol),
                "--out", str(out)]) == 0
    report = json.loads((ws / "imported.report.json").read_text())
    own = json.loads((ws / "model.report.json").read_text())
    assert report["recomputed_objective"] == pytest.approx(own["objective"],
                                                           abs=1e-8)


def test_simulate_constant_controller(workspace):
    ws, cfg = workspace
    out = ws / "trace.csv"
    assert run(["simulate", "--config", str(cfg), "--controller", "const:54",
                "--out", str(out)]) == 0
    metrics = json.loads((ws / "trace.metrics.json").read_text())
    assert metrics["iae"] >= 0.0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x,u,latency_s"
    assert len(lines) == 12  # 10 steps + terminal row + header


def test_simulate_model_controller(workspace, tmp_path):
    ws, cfg = workspace
    mpath = tmp_path / "ref.tree.json"
    mpath.write_text(serialize(reference_model()))
    assert run(["simulate", "--config", str(cfg),
                "--controller", f"model:{mpath}",
                "--out", str(tmp_path / "trace.csv")]) == 0


def test_usage_error_exit_code(capsys):
    assert run(["train"]) == 1  # missing --data
    assert run(["bogus-command"]) == 1
    capsys.readouterr()


def test_runtime_error_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert run(["train", "--data", str(missing),
                "--out", str(tmp_path / "m.json")]) == 2
    assert run(["simulate", "--controller", "warp-drive",
                "--out", str(tmp_path / "t.csv")]) == 2
    capsys.readouterr()


def test_defaults_document_shape():
    assert set(DEFAULTS) == {"plant", "mpc", "learn", "data", "sim"}
