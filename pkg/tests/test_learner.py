import numpy as np
import pytest

from oracles import brute_force_depth1
from symtree.basis import basis_from_forms
from symtree.errors import ConfigError
from symtree.learner import (Dataset, LearnConfig, candidate_thresholds,
                             default_y_bounds, fit_tree, objective_of)
from symtree.tree import (BRANCH, INACTIVE, LEAF, Bounds, BranchRule,
                          LeafExpression, TreeModel, TreeTopology, predict,
                          validate)

def random_instance(rng):
    n = int(rng.integers(3, 9))
    forms = [["1"], ["1", "x"]][int(rng.integers(0, 2))]
    X = np.round(rng.uniform(0.2, 2.0, (n, 1)), 2)
    y = np.round(rng.uniform(-2.0, 2.0, n), 2)
    cfg = LearnConfig(depth=1,
                      lambda_c=float(rng.choice([0.0, 1e-2])),
                      lambda_m=float(rng.choice([0.0, 1e-2, 0.2])),
                      c_lb=-10.0, c_ub=10.0)
    return Dataset(X=X, y=y), basis_from_forms(forms), cfg


def test_fit_tree_matches_brute_force():
    rng = np.random.default_rng(23)
    for trial in range(20):
        data, basis, cfg = random_instance(rng)
        rep = fit_tree(data, basis, cfg)
        ref = brute_force_depth1(data, basis, cfg)
        assert rep.objective == pytest.approx(ref, abs=1e-8), f"trial {trial}"


def test_step_function_recovered_exactly():
    data = Dataset(X=[[0.0], [1.0], [2.0], [3.0]], y=[0.0, 0.0, 5.0, 5.0])
    cfg = LearnConfig(depth=1, lambda_c=0.0, lambda_m=0.0)
    rep = fit_tree(data, basis_from_forms(["1"]), cfg)
    assert rep.objective == pytest.approx(0.0, abs=1e-10)
    assert rep.model.rules[1].threshold == pytest.approx(1.5)
    assert predict(rep.model, 0.5) == pytest.approx(0.0, abs=1e-9)
    assert predict(rep.model, 2.5) == pytest.approx(5.0, abs=1e-9)


def test_line_is_in_model_class():
    data = Dataset(X=[[0.0], [1.0], [2.0], [3.0]], y=[0.0, 1.0, 2.0, 3.0])
    cfg = LearnConfig(depth=1, lambda_c=0.0, lambda_m=0.0)
    rep = fit_tree(data, basis_from_forms(["1", "x"]), cfg)
    assert rep.objective == pytest.approx(0.0, abs=1e-9)


def test_report_self_consistency():
    rng = np.random.default_rng(29)
    data = Dataset(X=rng.uniform(0.1, 0.9, (10, 1)), y=rng.uniform(0, 1, 10))
    cfg = LearnConfig(depth=2)
    rep = fit_tree(data, basis_from_forms(["1", "x"]), cfg)
    objective, breakdown = objective_of(rep.model, data, cfg)
    assert objective == pytest.approx(rep.objective, abs=1e-10)
    assert breakdown == rep.breakdown
    assert validate(rep.model) == []


def test_objective_counts_branch_nodes():
    basis = basis_from_forms(["1"])
    model = TreeModel(
        topology=TreeTopology(depth=1, kinds={1: BRANCH, 2: LEAF, 3: LEAF}),
        rules={1: BranchRule(feature=0, threshold=0.5)},
        leaves={2: LeafExpression(coefficients=(0.0,)),
                3: LeafExpression(coefficients=(0.0,))},
        basis=basis, bounds=Bounds(-1, 1, -1, 1),
    )
    data = Dataset(X=[[0.0], [1.0]], y=[0.0, 0.0])
    cfg = LearnConfig(depth=1, lambda_c=1.0, lambda_m=0.0)
    objective, (l_acc, l_c, l_m) = objective_of(model, data, cfg)
    assert objective == pytest.approx(1.0)
    assert (l_acc, l_c, l_m) == (0.0, 1.0, 0.0)


def test_random_trees_never_beat_optimum():
    rng = np.random.default_rng(31)
    data = Dataset(X=rng.uniform(0.1, 0.9, (8, 1)), y=rng.uniform(-1, 1, 8))
    basis = basis_from_forms(["1"])
    cfg = LearnConfig(depth=1, lambda_c=1e-2, lambda_m=1e-2)
    opt = fit_tree(data, basis, cfg).objective
    for _ in range(50):
        thr = float(rng.uniform(0.0, 1.0))
        c2, c3 = rng.uniform(-1, 1, 2)
        model = TreeModel(
            topology=TreeTopology(depth=1, kinds={1: BRANCH, 2: LEAF, 3: LEAF}),
            rules={1: BranchRule(feature=0, threshold=thr)},
            leaves={2: LeafExpression(coefficients=(float(c2),)),
                    3: LeafExpression(coefficients=(float(c3),))},
            basis=basis, bounds=Bounds(-100, 100, -100, 100),
        )
        objective, _ = objective_of(model, data, cfg)
        assert objective >= opt - 1e-8


def test_deeper_trees_never_worse():
    rng = np.random.default_rng(37)
    data = Dataset(X=rng.uniform(0.1, 0.9, (9, 1)),
                   y=np.sin(6 * rng.uniform(0.1, 0.9, 9)))
    basis = basis_from_forms(["1"])
    o1 = fit_tree(data, basis, LearnConfig(depth=1)).objective
    o2 = fit_tree(data, basis, LearnConfig(depth=2)).objective
    assert o2 <= o1 + 1e-9


def test_in_class_recovery():
    rng = np.random.default_rng(41)
    basis = basis_from_forms(["1", "x"])
    truth = TreeModel(
        topology=TreeTopology(depth=2, kinds={1: BRANCH, 2: BRANCH, 3: LEAF,
                                              4: LEAF, 5: LEAF,
                                              6: INACTIVE, 7: INACTIVE}),
        rules={1: BranchRule(feature=0, threshold=0.6),
               2: BranchRule(feature=0, threshold=0.3)},
        leaves={3: LeafExpression(coefficients=(1.0, -2.0)),
                4: LeafExpression(coefficients=(0.5, 3.0)),
                5: LeafExpression(coefficients=(-1.5, 0.0))},
        basis=basis, bounds=Bounds(-100, 100, -100, 100),
    )
    X = rng.uniform(0.1, 0.9, (12, 1))
    y = np.array([predict(truth, x) for x in X])
    rep = fit_tree(Dataset(X=X, y=y), basis,
                   LearnConfig(depth=2, lambda_c=0.0, lambda_m=0.0))
    assert rep.objective <= 1e-8


def test_training_predictions_respect_y_bounds():
    rng = np.random.default_rng(43)
    data = Dataset(X=rng.uniform(0.1, 0.9, (10, 1)), y=rng.uniform(40, 80, 10))
    cfg = LearnConfig(depth=2)
    rep = fit_tree(data, basis_from_forms(["1", "x"]), cfg)
    y_lb, y_ub = cfg.resolved_y_bounds(data.y)
    for i in range(data.n_points):
        p = predict(rep.model, data.X[i])
        assert y_lb - 1e-6 <= p <= y_ub + 1e-6


def test_candidate_thresholds():
    data = Dataset(X=[[0.1], [0.5], [0.9]], y=[0, 0, 0])
    assert np.allclose(candidate_thresholds(data, 0), [0.3, 0.7])
    same = Dataset(X=[[0.4], [0.4]], y=[0, 0])
    assert candidate_thresholds(same, 0).size == 0
    rng = np.random.default_rng(47)
    big = Dataset(X=rng.uniform(0.1, 0.9, (50, 1)), y=np.zeros(50))
    thrs = candidate_thresholds(big, 0)
    assert thrs.size == 49
    assert np.all(np.diff(thrs) > 0)
    with pytest.raises(IndexError):
        candidate_thresholds(data, 3)


def test_default_y_bounds():
    lo, hi = default_y_bounds([0.0, 10.0])
    assert (lo, hi) == (-1.0, 11.0)
    lo, hi = default_y_bounds([5.0, 5.0])
    assert lo < 5.0 < hi


def test_dataset_csv_round_trip_and_hash():
    rng = np.random.default_rng(53)
    data = Dataset(X=rng.uniform(0, 1, (5, 1)), y=rng.uniform(0, 1, 5))
    again = Dataset.from_csv(data.to_csv())
    assert np.array_equal(again.X, data.X)
    assert np.array_equal(again.y, data.y)
    assert again.sha256() == data.sha256()


def test_dataset_rejects_bad_input():
    with pytest.raises(ConfigError):
        Dataset(X=[[1.0], [2.0]], y=[1.0])
    with pytest.raises(ConfigError):
        Dataset(X=[[np.nan]], y=[1.0])
