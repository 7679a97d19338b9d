import json

import numpy as np
import pytest

from oracles import embed_model, milp_optimum_depth1
from symtree import milp
from symtree.basis import basis_from_forms, canonical_basis, evaluate_basis_matrix
from symtree.errors import ConfigError, IntegralityError, StructureError
from symtree.learner import Dataset, LearnConfig, fit_tree, objective_of
from symtree.lp import EQ, GE, LE
from symtree.milp import (BINARY, CONTINUOUS, build_milp, expected_counts,
                          mps_text, name_map, parse_mps_counts,
                          parse_solution_text, read_solution, write_mps)
from symtree.tree import BRANCH, route, validate


def tiny_instance():
    basis = basis_from_forms(["x"])
    data = Dataset(X=[[0.5]], y=[0.2])
    cfg = LearnConfig(depth=1, y_lb=-1.0, y_ub=1.0)
    return data, basis, cfg


def test_count_formulas_for_random_sizes():
    rng = np.random.default_rng(61)
    for _ in range(6):
        n_d = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 3))
        n_k = int(rng.integers(1, 4))
        forms = ["1", "x", "x^2"][:n_k]
        data = Dataset(X=rng.uniform(0.2, 1.0, (n_d, 1)),
                       y=rng.uniform(-1, 1, n_d))
        art = build_milp(data, basis_from_forms(forms), LearnConfig(depth=depth))
        n_vars, n_bin, n_rows = expected_counts(n_d, 1, depth, n_k)
        assert (art.n_vars, art.n_binary, art.n_rows) == (n_vars, n_bin, n_rows)


def test_canonical_counts_near_reported():
    rng = np.random.default_rng(67)
    data = Dataset(X=np.sort(rng.uniform(0.1, 0.9, 50)).reshape(-1, 1),
                   y=rng.uniform(40, 80, 50))
    art = build_milp(data, canonical_basis(), LearnConfig())
    assert (art.n_vars, art.n_binary, art.n_rows) == (1612, 360, 3663)
    assert abs(art.n_vars - 1615) <= 5
    assert abs(art.n_binary - 363) <= 5
    assert abs(art.n_rows - 3662) <= 10


def test_tiny_instance_counts():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    assert art.n_binary == 7
    assert art.n_vars - art.n_binary == 19


def test_zero_penalties_strip_objective():
    data, basis, cfg = tiny_instance()
    cfg.lambda_c = cfg.lambda_m = 0.0
    art = build_milp(data, basis, cfg)
    names = {art.variables[i].name.split("[")[0] for i, _ in art.objective}
    assert names == {"epos", "eneg"}


def test_small_big_m_rejected():
    data, basis, cfg = tiny_instance()
    cfg.big_M = 1e-3
    with pytest.raises(ConfigError):
        build_milp(data, basis, cfg)


def test_mps_round_trip_counts(tmp_path):
    rng = np.random.default_rng(71)
    data = Dataset(X=rng.uniform(0.2, 1.0, (5, 1)), y=rng.uniform(-1, 1, 5))
    art = build_milp(data, basis_from_forms(["1", "x"]), LearnConfig(depth=2))
    path = tmp_path / "prob.mps"
    write_mps(art, path)
    counts = parse_mps_counts(path.read_text())
    assert counts == {"n_rows": art.n_rows, "n_vars": art.n_vars,
                      "n_binary": art.n_binary}
    sidecar = json.loads((tmp_path / "prob.names.json").read_text())
    assert len(sidecar["variables"]) == art.n_vars
    assert len(sidecar["rows"]) == art.n_rows
    assert sidecar["variables"]["D1"] == "d[1]"


def test_mps_deterministic():
    data, basis, cfg = tiny_instance()
    assert mps_text(build_milp(data, basis, cfg)) == \
        mps_text(build_milp(data, basis, cfg))


def test_empty_artifact_rejected():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    art.rows = []
    with pytest.raises(ConfigError):
        mps_text(art)


def test_columns_cover_every_variable():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    text = mps_text(art)
    in_columns = set()
    section = None
    for line in text.splitlines():
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        if section == "COLUMNS":
            fields = line.split()
            in_columns.add(fields[0])
    assert in_columns == {v.mps for v in art.variables}


def test_machine_names_are_short_and_unique():
    rng = np.random.default_rng(73)
    data = Dataset(X=rng.uniform(0.2, 1.0, (9, 1)), y=rng.uniform(-1, 1, 9))
    art = build_milp(data, basis_from_forms(["1", "x"]), LearnConfig(depth=2))
    names = [v.mps for v in art.variables]
    assert len(set(names)) == len(names)
    assert all(len(n) <= 8 for n in names)


def test_fitted_tree_embeds_feasibly():
    rng = np.random.default_rng(79)
    data = Dataset(X=np.round(rng.uniform(0.2, 1.0, (6, 1)), 2),
                   y=rng.uniform(-1, 1, 6))
    basis = basis_from_forms(["1", "x"])
    cfg = LearnConfig(depth=1)
    art = build_milp(data, basis, cfg)
    rep = fit_tree(data, basis, cfg)
    assign = embed_model(art, rep.model)
    assert art.max_violation(assign) <= 1e-9
    assert art.objective_value(assign) == pytest.approx(rep.objective, abs=1e-8)


def test_cross_solver_consistency():
    rng = np.random.default_rng(83)
    for trial in range(5):
        n = int(rng.integers(3, 7))
        data = Dataset(X=np.round(rng.uniform(0.2, 1.0, (n, 1)), 2),
                       y=np.round(rng.uniform(-1, 1, n), 2))
        basis = basis_from_forms(["1", "x"][: int(rng.integers(1, 3))])
        cfg = LearnConfig(depth=1, lambda_m=float(rng.choice([0.0, 1e-2])))
        art = build_milp(data, basis, cfg)
        ref = milp_optimum_depth1(art)
        rep = fit_tree(data, basis, cfg)
        assert rep.objective == pytest.approx(ref, abs=1e-6), f"trial {trial}"


def test_read_solution_round_trip():
    rng = np.random.default_rng(89)
    data = Dataset(X=np.round(rng.uniform(0.2, 1.0, (6, 1)), 2),
                   y=rng.uniform(-1, 1, 6))
    basis = basis_from_forms(["1", "x"])
    cfg = LearnConfig(depth=2)
    art = build_milp(data, basis, cfg)
    rep = fit_tree(data, basis, cfg)
    assign = embed_model(art, rep.model)
    decoded = read_solution(art, assign)
    assert validate(decoded.model) == []
    assert decoded.objective == pytest.approx(rep.objective, abs=1e-8)
    # binaries only: thresholds and coefficients must be reconstructed
    binaries = {k: v for k, v in assign.items()
                if k.split("[")[0] in ("d", "z", "a")}
    decoded2 = read_solution(art, binaries)
    assert validate(decoded2.model) == []
    assert decoded2.objective == pytest.approx(rep.objective, abs=1e-8)


def test_read_solution_rejects_leaf_root():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    assign = {"d[1]": 0.0, "d[2]": 0.0, "d[3]": 0.0}
    with pytest.raises(StructureError):
        read_solution(art, assign)


def test_read_solution_rejects_fractional_binary():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    assign = {"d[1]": 0.4, "d[2]": 0.0, "d[3]": 0.0}
    with pytest.raises(IntegralityError):
        read_solution(art, assign)


def test_read_solution_missing_binary():
    data, basis, cfg = tiny_instance()
    art = build_milp(data, basis, cfg)
    with pytest.raises(StructureError):
        read_solution(art, {"d[1]": 1.0})


def test_all_zero_solution_objective():
    data = Dataset(X=[[0.3], [0.7]], y=[0.0, 0.0])
    basis = basis_from_forms(["1"])
    cfg = LearnConfig(depth=1, lambda_c=1e-2, y_lb=-1.0, y_ub=1.0)
    art = build_milp(data, basis, cfg)
    assign = {"d[1]": 1.0, "d[2]": 0.0, "d[3]": 0.0, "a[1,1]": 1.0,
              "b[1]": 0.5,
              "z[1,1]": 0.0, "z[1,2]": 1.0, "z[1,3]": 0.0,
              "z[2,1]": 0.0, "z[2,2]": 0.0, "z[2,3]": 1.0}
    for n in (1, 2, 3):
        assign[f"c[1,{n}]"] = 0.0
    decoded = read_solution(art, assign)
    assert decoded.objective == pytest.approx(cfg.lambda_c, abs=1e-12)


def test_solution_text_parsing():
    text = "# comment\nd[1] 1\nZ1_2 0.0  # trailing\n\nb[1] 0.55\n"
    parsed = parse_solution_text(text)
    assert parsed == {"d[1]": 1.0, "Z1_2": 0.0, "b[1]": 0.55}
