#!/usr/bin/env python3
"""Cross-checks the exported LP files against an independent MILP solver.

Drives the CLI to solve batch instances with the in-tree branch-and-bound,
exports the same models in LP format, re-solves them with scipy's HiGHS
backend, and compares objectives. Also verifies that inflating big-M leaves
the optimum unchanged and that the full model never beats the simplified
one by more than the facility-choice slack allows.

Usage: cross_check_lp.py <ambopt-cli> <workdir>
"""

import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

REPO = Path(__file__).resolve().parent.parent


def parse_lp(text):
    """Parses the subset of CPLEX LP format the exporter emits."""
    sections = {"objective": [], "constraints": [], "bounds": [], "binaries": []}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        low = line.lower()
        if low == "minimize":
            current = "objective"
            continue
        if low == "subject to":
            current = "constraints"
            continue
        if low == "bounds":
            current = "bounds"
            continue
        if low == "binaries":
            current = "binaries"
            continue
        if low == "end":
            break
        sections[current].append(line)

    def parse_terms(expr):
        # The exporter emits "coef var [+|- coef var]..." with optional
        # trailing constants; walk the token stream.
        terms, constant = {}, 0.0
        tokens = expr.split()
        sign, pending = 1.0, None
        for tok in tokens:
            if tok == "+":
                if pending is not None:
                    constant += sign * pending
                    pending = None
                sign = 1.0
            elif tok == "-":
                if pending is not None:
                    constant += sign * pending
                    pending = None
                sign = -1.0
            else:
                try:
                    pending = float(tok)
                except ValueError:
                    coef = sign * (1.0 if pending is None else pending)
                    terms[tok] = terms.get(tok, 0.0) + coef
                    pending = None
                    sign = 1.0
        if pending is not None:
            constant += sign * pending
        return terms, constant

    obj_text = " ".join(sections["objective"])
    obj_text = obj_text.split(":", 1)[1]
    obj_terms, obj_constant = parse_terms(obj_text)

    constraints = []
    for line in sections["constraints"]:
        body = line.split(":", 1)[1]
        m = re.search(r"(<=|>=|=)", body)
        sense = m.group(1)
        lhs, rhs = body[: m.start()], float(body[m.end():])
        terms, c = parse_terms(lhs)
        constraints.append((terms, sense, rhs - c))

    bounds = {}
    for line in sections["bounds"]:
        lo, var, hi = re.match(
            r"([0-9.eE+-]+)\s*<=\s*([A-Za-z_][A-Za-z0-9_]*)\s*<=\s*(\S+)", line
        ).groups()
        bounds[var] = (float(lo), np.inf if hi == "+inf" else float(hi))

    binaries = set()
    for line in sections["binaries"]:
        binaries.update(line.split())

    variables = sorted(
        set(obj_terms) | binaries | set(bounds)
        | {v for t, _, _ in constraints for v in t}
    )
    return variables, obj_terms, obj_constant, constraints, bounds, binaries


def solve_lp(text):
    variables, obj, obj_constant, constraints, bounds, binaries = parse_lp(text)
    index = {v: i for i, v in enumerate(variables)}
    n = len(variables)
    c = np.zeros(n)
    for v, coef in obj.items():
        c[index[v]] = coef
    integrality = np.array([1 if v in binaries else 0 for v in variables])
    lb = np.zeros(n)
    ub = np.array([1.0 if v in binaries else np.inf for v in variables])
    for v, (lo, hi) in bounds.items():
        lb[index[v]], ub[index[v]] = lo, hi

    A = lil_matrix((len(constraints), n))
    clo, chi = np.full(len(constraints), -np.inf), np.full(len(constraints), np.inf)
    for r, (terms, sense, rhs) in enumerate(constraints):
        for v, coef in terms.items():
            A[r, index[v]] = coef
        if sense in ("<=", "="):
            chi[r] = rhs
        if sense in (">=", "="):
            clo[r] = rhs
    res = milp(
        c=c,
        integrality=integrality,
        bounds=Bounds(lb, ub),
        constraints=LinearConstraint(A.tocsr(), clo, chi),
    )
    if not res.success:
        return None
    return res.fun + obj_constant


def run_cli(cli, instance, workdir, tag, simplified):
    lp = workdir / f"{tag}.lp"
    out = workdir / f"{tag}.json"
    cmd = [cli, "solve-batch", "--instance", str(instance), "--export-lp",
           str(lp), "--out", str(out)]
    if simplified:
        cmd.append("--simplified")
    subprocess.run(cmd, check=True, capture_output=True)
    solution = json.loads(out.read_text())
    return lp.read_text(), solution


def main():
    cli, workdir = sys.argv[1], Path(sys.argv[2])
    workdir.mkdir(parents=True, exist_ok=True)
    failures = []

    desk = REPO / "data" / "batch_desk.json"

    # Simplified model: the external optimum must match the branch-and-bound.
    lp_text, solution = run_cli(cli, desk, workdir, "desk_simplified", True)
    external = solve_lp(lp_text)
    bb = solution["objective"]
    print(f"desk simplified: b&b {bb:.6f} external {external:.6f}")
    if external is None or abs(external - bb) > 1e-6:
        failures.append("simplified objective mismatch")
    if not solution["proved_optimal"]:
        failures.append("b&b did not prove optimality on the desk instance")

    # Full model: free facility choice can only help.
    lp_full, _ = run_cli(cli, desk, workdir, "desk_full", False)
    external_full = solve_lp(lp_full)
    print(f"desk full: external {external_full:.6f}")
    if external_full is None or external_full > bb + 1e-6:
        failures.append("full model worse than the simplified one")

    # Inflating big-M must not move the optimum.
    inflated = json.loads(desk.read_text())
    inflated["big_m"] = 1.0e7
    inflated_path = workdir / "desk_bigm.json"
    inflated_path.write_text(json.dumps(inflated))
    lp_big, sol_big = run_cli(cli, inflated_path, workdir, "desk_bigm", True)
    external_big = solve_lp(lp_big)
    print(f"desk inflated big-M: external {external_big:.6f}")
    if abs(external_big - external) > 1e-6:
        failures.append("big-M inflation moved the LP optimum")
    if abs(sol_big["objective"] - bb) > 1e-9:
        failures.append("big-M inflation moved the b&b optimum")

    # A couple of small perturbed instances keep the routes honest.
    rng = np.random.default_rng(7)
    base = json.loads(desk.read_text())
    for rep in range(2):
        small = dict(base)
        picked = rng.choice(len(base["calls"]), size=4, replace=False)
        small["calls"] = [dict(base["calls"][i]) for i in sorted(picked)]
        for call in small["calls"]:
            call["x"] = float(np.round(rng.uniform(0, 10), 4))
            call["y"] = float(np.round(rng.uniform(0, 10), 4))
        path = workdir / f"small{rep}.json"
        path.write_text(json.dumps(small))
        lp_s, sol_s = run_cli(cli, path, workdir, f"small{rep}", True)
        ext = solve_lp(lp_s)
        print(f"small{rep}: b&b {sol_s['objective']:.6f} external {ext:.6f}")
        if ext is None or abs(ext - sol_s["objective"]) > 1e-6:
            failures.append(f"small{rep} objective mismatch")

    if failures:
        print("FAILURES:", failures)
        return 1
    print("all LP cross-checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
