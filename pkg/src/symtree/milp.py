"""Materialization of the exact mixed-integer learning problem.

Builds every variable and constraint family of the learning formulation
(tree structure, assignment, one-hot feature choice, big-M routing, leaf
expressions, bilinear linearization, absolute-value splits), exports it as a
fixed-format MPS file with a sidecar name map, and decodes externally solved
assignments back into tree models. Claimed objectives are never trusted: a
decoded model is always re-scored internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, evaluate_basis_matrix
from .errors import ConfigError, IntegralityError, ParseError, StructureError
from .learner import Dataset, LearnConfig, objective_of
from .lp import EQ, GE, LE, fit_l1
from .tree import (BRANCH, INACTIVE, LEAF, Bounds, BranchRule, LeafExpression,
                   TreeModel, TreeTopology, ancestors, node_depth)

BINARY = "binary"
CONTINUOUS = "continuous"
INT_TOL = 1e-5


@dataclass
class MilpVar:
    name: str      # structured, e.g. "z[17,5]"
    mps: str       # fixed-format machine name, <= 8 chars
    kind: str      # BINARY | CONTINUOUS
    lo: float
    hi: float


@dataclass
class MilpRow:
    name: str
    mps: str
    sense: str     # one of lp.LE / lp.EQ / lp.GE
    rhs: float
    terms: list    # (var_index, coefficient)


@dataclass
class MilpArtifact:
    variables: list
    rows: list
    objective: list            # (var_index, coefficient)
    data: Dataset
    basis: BasisSet
    cfg: LearnConfig
    y_bounds: tuple
    index: dict = field(default_factory=dict)  # structured and mps name -> var idx

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_binary(self) -> int:
        return sum(1 for v in self.variables if v.kind == BINARY)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def var_value(self, assign: dict, i: int, default=0.0):
        v = self.variables[i]
        if v.name in assign:
            return assign[v.name]
        if v.mps in assign:
            return assign[v.mps]
        return default

    def objective_value(self, assign: dict) -> float:
        return sum(coef * self.var_value(assign, i) for i, coef in self.objective)

    def max_violation(self, assign: dict) -> float:
        """Largest constraint violation of a full assignment (bounds included)."""
        worst = 0.0
        for row in self.rows:
            act = sum(coef * self.var_value(assign, i) for i, coef in row.terms)
            if row.sense == LE:
                worst = max(worst, act - row.rhs)
            elif row.sense == GE:
                worst = max(worst, row.rhs - act)
            else:
                worst = max(worst, abs(act - row.rhs))
        for i, v in enumerate(self.variables):
            val = self.var_value(assign, i)
            worst = max(worst, v.lo - val, val - v.hi)
        return worst


def node_sets(depth: int):
    """(all nodes, terminal nodes, internal nodes) for the complete tree."""
    all_nodes = list(range(1, 2 ** (depth + 1)))
    terminal = [n for n in all_nodes if node_depth(n) == depth]
    internal = [n for n in all_nodes if node_depth(n) < depth]
    return all_nodes, terminal, internal


def left_right_ancestors(n: int):
    """Ancestors split by branch direction on the path from the root to n."""
    lefts, rights = [], []
    cur = n
    while cur > 1:
        parent = cur // 2
        (lefts if cur % 2 == 0 else rights).append(parent)
        cur = parent
    return lefts, rights


def expected_counts(n_data: int, n_features: int, depth: int, n_basis: int):
    """Formulation-derived (variables, binaries, rows) counts."""
    nn = 2 ** (depth + 1) - 1
    nint = 2**depth - 1
    binaries = nn * (1 + n_data) + n_features * nint
    continuous = 2 * n_data * nn + n_data + 2 * n_data + 3 * n_basis * nn + nint
    path_len = sum(len(ancestors(n)) for n in range(1, nn + 1))
    rows = (
        (2 * nint + 1 + (nn - nint))        # structure
        + n_data * nn                        # no data on branch nodes
        + n_data                             # every point assigned once
        + n_data * path_len                  # no data on inactive nodes
        + nint                               # one-hot feature choice
        + n_data * path_len                  # big-M routing
        + n_data * nn                        # node expressions
        + 2 * n_basis * nn                   # zero coefficients at branch nodes
        + 4 * n_data * nn                    # bilinear linearization
        + n_data                             # tree output
        + n_data + n_basis * nn              # absolute-value splits
    )
    return binaries + continuous, binaries, rows


def build_milp(data: Dataset, basis: BasisSet, cfg: LearnConfig) -> MilpArtifact:
    """Emit the full variable/constraint representation of the learning problem."""
    cfg.check()
    y_lb, y_ub = cfg.resolved_y_bounds(data.y)
    # delta = yhat*z vanishes wherever z = 0, so its bounds must admit 0 even
    # when the prediction range itself excludes it.
    d_lb, d_ub = min(y_lb, 0.0), max(y_ub, 0.0)
    x_mag = float(np.max(np.abs(data.X)))
    if cfg.big_M < max(2.0 * x_mag + cfg.eps_routing, y_ub - y_lb):
        raise ConfigError(f"big-M {cfg.big_M} too small for data range {x_mag} "
                          f"and prediction range [{y_lb}, {y_ub}]")
    Phi = evaluate_basis_matrix(basis, data.X)
    # The linearization constant must dominate every attainable node expression
    # |phi(x_i) . c|, else it would cut optimal trees whose leaf expressions are
    # large away from their own region.
    c_mag = max(abs(cfg.c_lb), abs(cfg.c_ub))
    tie_M = max(cfg.big_M, c_mag * float(np.max(np.sum(np.abs(Phi), axis=1)))
                + max(abs(y_lb), abs(y_ub)))
    nn, terminal, internal = node_sets(cfg.depth)
    N_d, N_f, N_K = data.n_points, data.n_features, basis.size
    M, eps = cfg.big_M, cfg.eps_routing

    variables, index = [], {}

    def add_var(name, mps, kind, lo, hi):
        if len(mps) > 8:
            raise ConfigError(f"machine name {mps!r} exceeds fixed-format width")
        if mps in index or name in index:
            raise ConfigError(f"duplicate variable name {mps!r}")
        index[name] = index[mps] = len(variables)
        variables.append(MilpVar(name=name, mps=mps, kind=kind, lo=lo, hi=hi))
        return len(variables) - 1

    d = {n: add_var(f"d[{n}]", f"D{n}", BINARY, 0.0, 1.0) for n in nn}
    z = {(i, n): add_var(f"z[{i},{n}]", f"Z{i}_{n}", BINARY, 0.0, 1.0)
         for i in range(1, N_d + 1) for n in nn}
    a = {(f, n): add_var(f"a[{f},{n}]", f"A{f}_{n}", BINARY, 0.0, 1.0)
         for f in range(1, N_f + 1) for n in internal}
    b = {n: add_var(f"b[{n}]", f"B{n}", CONTINUOUS, -np.inf, np.inf) for n in internal}
    c = {(k, n): add_var(f"c[{k},{n}]", f"C{k}_{n}", CONTINUOUS, cfg.c_lb, cfg.c_ub)
         for k in range(1, N_K + 1) for n in nn}
    yhat = {(i, n): add_var(f"yhat[{i},{n}]", f"YH{i}_{n}", CONTINUOUS,
                            -np.inf, np.inf)
            for i in range(1, N_d + 1) for n in nn}
    delta = {(i, n): add_var(f"delta[{i},{n}]", f"DL{i}_{n}", CONTINUOUS, d_lb, d_ub)
             for i in range(1, N_d + 1) for n in nn}
    epos = {i: add_var(f"epos[{i}]", f"EP{i}", CONTINUOUS, 0.0, np.inf)
            for i in range(1, N_d + 1)}
    eneg = {i: add_var(f"eneg[{i}]", f"EN{i}", CONTINUOUS, 0.0, np.inf)
            for i in range(1, N_d + 1)}
    cpos = {(k, n): add_var(f"cpos[{k},{n}]", f"CP{k}_{n}", CONTINUOUS, 0.0, np.inf)
            for k in range(1, N_K + 1) for n in nn}
    cneg = {(k, n): add_var(f"cneg[{k},{n}]", f"CN{k}_{n}", CONTINUOUS, 0.0, np.inf)
            for k in range(1, N_K + 1) for n in nn}
    ypred = {i: add_var(f"ypred[{i}]", f"YP{i}", CONTINUOUS, y_lb, y_ub)
             for i in range(1, N_d + 1)}

    rows = []

    def add_row(name, sense, rhs, terms):
        rows.append(MilpRow(name=name, mps=f"R{len(rows) + 1:07d}",
                            sense=sense, rhs=float(rhs), terms=terms))

    # Tree structure: children branch only under a branching parent; the root
    # branches; maximal-depth nodes never branch.
    for n in internal:
        add_row(f"struct_left[{n}]", LE, 0.0, [(d[2 * n], 1.0), (d[n], -1.0)])
        add_row(f"struct_right[{n}]", LE, 0.0, [(d[2 * n + 1], 1.0), (d[n], -1.0)])
    add_row("struct_root", EQ, 1.0, [(d[1], 1.0)])
    for n in terminal:
        add_row(f"struct_leaf[{n}]", EQ, 0.0, [(d[n], 1.0)])
    # No data on branching nodes.
    for i in range(1, N_d + 1):
        for n in nn:
            add_row(f"no_branch_data[{i},{n}]", LE, 1.0,
                    [(z[i, n], 1.0), (d[n], 1.0)])
    # Every data point assigned exactly once.
    for i in range(1, N_d + 1):
        add_row(f"assign_once[{i}]", EQ, 1.0, [(z[i, n], 1.0) for n in nn])
    # No data on inactive nodes: assignment implies branching ancestors.
    for i in range(1, N_d + 1):
        for n in nn:
            for m in ancestors(n):
                add_row(f"active_path[{i},{n},{m}]", LE, 0.0,
                        [(z[i, n], 1.0), (d[m], -1.0)])
    # Exactly one branching feature at each branching node.
    for n in internal:
        add_row(f"one_feature[{n}]", EQ, 0.0,
                [(a[f, n], 1.0) for f in range(1, N_f + 1)] + [(d[n], -1.0)])
    # Big-M routing along the path of the assigned node.
    for i in range(1, N_d + 1):
        xi = data.X[i - 1]
        for n in nn:
            lefts, rights = left_right_ancestors(n)
            for m in lefts:
                terms = [(a[f, m], float(xi[f - 1])) for f in range(1, N_f + 1)]
                terms += [(b[m], -1.0), (z[i, n], M)]
                add_row(f"route_left[{i},{n},{m}]", LE, M - eps, terms)
            for m in rights:
                terms = [(a[f, m], float(xi[f - 1])) for f in range(1, N_f + 1)]
                terms += [(b[m], -1.0), (z[i, n], -M)]
                add_row(f"route_right[{i},{n},{m}]", GE, -M, terms)
    # Node expression values.
    for i in range(1, N_d + 1):
        for n in nn:
            terms = [(yhat[i, n], 1.0)]
            terms += [(c[k, n], -float(Phi[i - 1, k - 1])) for k in range(1, N_K + 1)]
            add_row(f"node_value[{i},{n}]", EQ, 0.0, terms)
    # Branch nodes carry zero coefficients.
    for k in range(1, N_K + 1):
        for n in nn:
            add_row(f"coef_ub[{k},{n}]", LE, cfg.c_ub,
                    [(c[k, n], 1.0), (d[n], cfg.c_ub)])
            add_row(f"coef_lb[{k},{n}]", GE, cfg.c_lb,
                    [(c[k, n], 1.0), (d[n], cfg.c_lb)])
    # Linearized product delta = yhat * z.
    for i in range(1, N_d + 1):
        for n in nn:
            add_row(f"prod_ub[{i},{n}]", LE, 0.0,
                    [(delta[i, n], 1.0), (z[i, n], -y_ub)])
            add_row(f"prod_lb[{i},{n}]", GE, 0.0,
                    [(delta[i, n], 1.0), (z[i, n], -y_lb)])
            add_row(f"prod_tie_ub[{i},{n}]", LE, tie_M,
                    [(delta[i, n], 1.0), (yhat[i, n], -1.0), (z[i, n], tie_M)])
            add_row(f"prod_tie_lb[{i},{n}]", GE, -tie_M,
                    [(delta[i, n], 1.0), (yhat[i, n], -1.0), (z[i, n], -tie_M)])
    # Tree output is the assigned node's expression value.
    for i in range(1, N_d + 1):
        add_row(f"output[{i}]", EQ, 0.0,
                [(ypred[i], 1.0)] + [(delta[i, n], -1.0) for n in nn])
    # Absolute-value splits for residuals and coefficients.
    for i in range(1, N_d + 1):
        add_row(f"resid_split[{i}]", EQ, float(data.y[i - 1]),
                [(epos[i], 1.0), (eneg[i], -1.0), (ypred[i], 1.0)])
    for k in range(1, N_K + 1):
        for n in nn:
            add_row(f"coef_split[{k},{n}]", EQ, 0.0,
                    [(cpos[k, n], 1.0), (cneg[k, n], -1.0), (c[k, n], -1.0)])

    objective = []
    w = 1.0 / N_d
    for i in range(1, N_d + 1):
        objective += [(epos[i], w), (eneg[i], w)]
    if cfg.lambda_c:
        objective += [(d[n], cfg.lambda_c) for n in nn]
    if cfg.lambda_m:
        for k in range(1, N_K + 1):
            for n in nn:
                objective += [(cpos[k, n], cfg.lambda_m), (cneg[k, n], cfg.lambda_m)]

    return MilpArtifact(variables=variables, rows=rows, objective=objective,
                        data=data, basis=basis, cfg=cfg, y_bounds=(y_lb, y_ub),
                        index=index)


def _fmt12(v: float) -> str:
    for prec in range(12, 2, -1):
        s = f"{float(v):.{prec}g}"
        if len(s) <= 12:
            return s
    return f"{float(v):.2g}"[:12]


def mps_text(art: MilpArtifact) -> str:
    """Fixed-format MPS document (NAME/ROWS/COLUMNS/RHS/BOUNDS/ENDATA)."""
    if not art.rows:
        raise ConfigError("refusing to export an artifact with no constraint rows")
    sense_tag = {LE: "L", EQ: "E", GE: "G"}
    lines = ["NAME          SYMTREE", "ROWS", " N  OBJ"]
    for row in art.rows:
        lines.append(f" {sense_tag[row.sense]}  {row.mps}")
    # Column-major entries, variable order then row order.
    col_entries = [[] for _ in art.variables]
    for i, coef in art.objective:
        if coef != 0.0:
            col_entries[i].append(("OBJ", coef))
    for row in art.rows:
        for i, coef in row.terms:
            if coef != 0.0:
                col_entries[i].append((row.mps, coef))
    lines.append("COLUMNS")
    for var, entries in zip(art.variables, col_entries):
        for j in range(0, len(entries), 2):
            pair = entries[j : j + 2]
            line = f"    {var.mps:<10}{pair[0][0]:<10}{_fmt12(pair[0][1]):<12}"
            if len(pair) == 2:
                line = f"{line}   {pair[1][0]:<10}{_fmt12(pair[1][1]):<12}"
            lines.append(line.rstrip())
    lines.append("RHS")
    rhs_entries = [(row.mps, row.rhs) for row in art.rows if row.rhs != 0.0]
    for j in range(0, len(rhs_entries), 2):
        pair = rhs_entries[j : j + 2]
        line = f"    {'RHS':<10}{pair[0][0]:<10}{_fmt12(pair[0][1]):<12}"
        if len(pair) == 2:
            line = f"{line}   {pair[1][0]:<10}{_fmt12(pair[1][1]):<12}"
        lines.append(line.rstrip())
    lines.append("BOUNDS")
    for var in art.variables:
        if var.kind == BINARY:
            lines.append(f" BV {'BND':<10}{var.mps}")
            continue
        lo_inf, hi_inf = not np.isfinite(var.lo), not np.isfinite(var.hi)
        if lo_inf and hi_inf:
            lines.append(f" FR {'BND':<10}{var.mps}")
            continue
        if lo_inf:
            lines.append(f" MI {'BND':<10}{var.mps}")
        elif var.lo != 0.0:
            lines.append(f" LO {'BND':<10}{var.mps:<10}{_fmt12(var.lo)}")
        if not hi_inf:
            lines.append(f" UP {'BND':<10}{var.mps:<10}{_fmt12(var.hi)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def name_map(art: MilpArtifact) -> dict:
    return {
        "variables": {v.mps: v.name for v in art.variables},
        "rows": {r.mps: r.name for r in art.rows},
    }


def write_mps(art: MilpArtifact, path) -> None:
    """Write the MPS file plus the sidecar machine-name map (<path>.names.json)."""
    text = mps_text(art)
    path = str(path)
    with open(path, "w") as fh:
        fh.write(text)
    sidecar = (path[:-4] if path.endswith(".mps") else path) + ".names.json"
    with open(sidecar, "w") as fh:
        json.dump(name_map(art), fh, indent=2)


def parse_mps_counts(text: str) -> dict:
    """Re-parse an MPS document; returns row/variable/binary counts."""
    section = None
    rows, cols, binaries = set(), set(), set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            if section not in ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES",
                               "BOUNDS", "ENDATA"):
                raise ParseError(f"line {lineno}: unknown section {section!r}")
            continue
        fields = raw.split()
        if section == "ROWS":
            if len(fields) != 2 or fields[0] not in "NLEG":
                raise ParseError(f"line {lineno}: malformed row declaration")
            if fields[0] != "N":
                rows.add(fields[1])
        elif section == "COLUMNS":
            cols.add(fields[0])
        elif section == "BOUNDS":
            if fields[0] == "BV":
                binaries.add(fields[2])
            cols.add(fields[2])
    return {"n_rows": len(rows), "n_vars": len(cols), "n_binary": len(binaries)}


def parse_solution_text(text: str) -> dict:
    """'name value' per line; '#' starts a comment; returns name -> float."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'name value'")
        try:
            out[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad value {parts[1]!r}") from exc
    return out


@dataclass
class DecodedSolution:
    model: TreeModel
    objective: float            # recomputed internally
    claimed_objective: float    # as provided by the solver, or None


def _binary(art: MilpArtifact, assign: dict, name: str) -> int:
    idx = art.index.get(name)
    v = art.var_value(assign, idx, default=None)
    if v is None:
        raise StructureError(f"assignment missing binary {name}")
    if abs(v - round(v)) > INT_TOL:
        raise IntegralityError(f"{name} = {v!r} is not within {INT_TOL:g} of binary")
    return int(round(v))


def read_solution(art: MilpArtifact, assignments: dict) -> DecodedSolution:
    """Decode an external assignment into a TreeModel and re-score it."""
    cfg, data = art.cfg, art.data
    nn, terminal, internal = node_sets(cfg.depth)
    dval = {n: _binary(art, assignments, f"d[{n}]") for n in nn}
    if dval[1] != 1:
        raise StructureError("root is not a branching node")
    for n in internal:
        for ch in (2 * n, 2 * n + 1):
            if dval[ch] > dval[n]:
                raise StructureError(f"node {ch} branches under non-branching parent {n}")
    for n in terminal:
        if dval[n] != 0:
            raise StructureError(f"maximal-depth node {n} marked as branching")
    active = {1: True}
    for n in nn:
        if n > 1:
            active[n] = active[n // 2] and dval[n // 2] == 1
    kinds = {n: (BRANCH if dval[n] else LEAF) if active[n] else INACTIVE for n in nn}

    # Leaf assignment of each data point from z.
    assigned = {}
    for i in range(1, data.n_points + 1):
        hits = [n for n in nn if _binary(art, assignments, f"z[{i},{n}]") == 1]
        if len(hits) != 1:
            raise StructureError(f"data point {i} assigned to {len(hits)} nodes")
        assigned[i] = hits[0]

    rules = {}
    for n in nn:
        if kinds[n] != BRANCH:
            continue
        hot = [f for f in range(1, data.n_features + 1)
               if _binary(art, assignments, f"a[{f},{n}]") == 1]
        if len(hot) != 1:
            raise StructureError(f"branch node {n} selects {len(hot)} features")
        feature = hot[0] - 1
        bname = f"b[{n}]"
        thr = art.var_value(assignments, art.index[bname], default=None)
        if thr is None:
            thr = _reconstruct_threshold(data, assigned, n, feature, cfg.eps_routing)
        rules[n] = BranchRule(feature=feature, threshold=float(thr))

    Phi = evaluate_basis_matrix(art.basis, data.X)
    leaves = {}
    for n in nn:
        if kinds[n] != LEAF:
            continue
        coeffs = [art.var_value(assignments, art.index[f"c[{k},{n}]"], default=None)
                  for k in range(1, art.basis.size + 1)]
        if any(v is None for v in coeffs):
            idx = [i - 1 for i in range(1, data.n_points + 1) if assigned[i] == n]
            coeffs, _ = fit_l1(Phi[idx], data.y[idx], 1.0 / data.n_points,
                               cfg.lambda_m, (cfg.c_lb, cfg.c_ub),
                               y_bounds=art.y_bounds, Phi_bound=Phi[idx])
        leaves[n] = LeafExpression(coefficients=tuple(float(v) for v in coeffs))

    model = TreeModel(
        topology=TreeTopology(depth=cfg.depth, kinds=kinds),
        rules=rules, leaves=leaves, basis=art.basis,
        bounds=Bounds(cfg.c_lb, cfg.c_ub, art.y_bounds[0], art.y_bounds[1]),
    )
    recomputed, _ = objective_of(model, data, cfg)
    claimed = assignments.get("objective", assignments.get("OBJ"))
    return DecodedSolution(model=model, objective=recomputed, claimed_objective=claimed)


def _reconstruct_threshold(data: Dataset, assigned: dict, node: int, feature: int,
                           eps: float) -> float:
    lefts, rights = [], []
    for i, leaf in assigned.items():
        cur = leaf
        while cur > node:
            parent = cur // 2
            if parent == node:
                (lefts if cur % 2 == 0 else rights).append(data.X[i - 1, feature])
            cur = parent
    if lefts and rights:
        return (max(lefts) + min(rights)) / 2.0
    if rights:
        return float(min(rights))
    if lefts:
        return float(max(lefts)) + 2.0 * eps
    return 0.0
