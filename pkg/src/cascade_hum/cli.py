"""Command-line front end.

    cascade-hum SUBCOMMAND --config PATH [--out DIR] [--seed N]

Subcommands write CSV (floats as ``.16e``) and JSON-lines artifacts into the
output directory. No timings or paths go into artifacts, so two runs with
the same config and seed produce identical bytes.

Exit codes: 0 success (probe outcomes are data), 2 config error,
3 solver blowup, 4 CG failure, 5 eigensolver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .adjoint import check_gronwall, energy_history, solve_adjoint
from .backward import solve_backward_direct, solve_backward_transpose
from .carleman import (
    alpha_rate_constant,
    build_psi,
    carleman_check_cascade,
    carleman_check_single,
    eval_weights,
)
from .config import ExperimentConfig, load_config, serialize
from .errors import LabError
from .hum import certify_uniform_estimate, leaf_energy, synthesize_control
from .model import CascadeCoefficients, compute_lambda0, validate_structure
from .observability import assemble_gramian, cost_sweep, estimate_observability_constant, unique_continuation_probe
from .steps import StepOperators

SUBCOMMANDS = ("solve-adjoint", "synthesize", "observability", "uc-probe", "carleman", "cost-sweep")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Artifacts:
    def __init__(self, out_dir: str, formats):
        self.dir = out_dir
        self.formats = set(formats)
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def csv(self, name: str, header, rows):
        if "csv" not in self.formats:
            return
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
        self.written.append(path)

    def jsonl(self, name: str, records):
        if "jsonl" not in self.formats:
            return
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(_json_safe(rec), sort_keys=True) + "\n")
        self.written.append(path)

    def text(self, name: str, body: str):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(body)
        self.written.append(path)


def _validation(cfg: ExperimentConfig, coeffs: CascadeCoefficients):
    rep = validate_structure(coeffs, cfg.mask("G0_tilde"), cfg.tree())
    return {
        "admissible": rep.ok,
        "structure_violations": [str(v) for v in rep.structure_violations],
        "coupling_violations": len(rep.coupling_violations),
        "ellipticity_violations": len(rep.ellipticity_violations),
    }


def run_solve_adjoint(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid, tree = cfg.grid(), cfg.tree()
    ops = StepOperators(coeffs, tree, grid)
    rows, records = [], []
    for s, z0 in enumerate(cfg.initial_samples(grid, seed)):
        traj = solve_adjoint(z0, coeffs, tree, grid, ops=ops)
        energy = energy_history(traj, grid)
        for m in range(tree.depth + 1):
            comp = [grid.h * float(np.mean(np.sum(traj.z[m][:, i] ** 2, axis=-1))) for i in range(coeffs.n)]
            rows.append([s, m, tree.time(m), energy[m], *comp])
        g = check_gronwall(traj, coeffs, cfg.problem.T, grid)
        records.append({"sample": s, "growth": g.growth, "bound_rate": g.bound_rate, "C_fit": g.C_fit,
                        "passed": g.passed, "undefined": g.undefined})
    header = ["sample", "level", "t", "energy"] + [f"energy_z{i + 1}" for i in range(coeffs.n)]
    art.csv("adjoint_norms.csv", header, rows)
    art.jsonl("gronwall.jsonl", records)


def _observability(cfg, coeffs, grid, tree, ops=None):
    gram = assemble_gramian(coeffs, tree, grid, cfg.mask("G0", grid), ops=ops)
    est = estimate_observability_constant(gram, cfg.observability.rank_tol, cfg.observability.kernel_tol)
    return gram, est


def run_synthesize(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid, tree = cfg.grid(), cfg.tree()
    mask = cfg.mask("G0", grid)
    ops = StepOperators(coeffs, tree, grid)
    yT = cfg.terminal_data(grid, seed)
    y_norm = leaf_energy(yT, grid)
    _, est = _observability(cfg, coeffs, grid, tree, ops)
    rows, records = [], []
    for eps in cfg.solver.eps:
        res = synthesize_control(yT, eps, coeffs, tree, grid, mask, cfg.solver.cg_tol, cfg.solver.cg_max_iter, ops=ops)
        cert = certify_uniform_estimate(res, est.C_obs, y_norm, cfg.solver.cg_tol)
        bound = 0.5 * eps * est.C_obs * y_norm
        rows.append([eps, res.residual, bound, res.cost, res.cg_iterations, res.cg_relative_residual,
                     res.optimality_residual, cert.lhs, cert.rhs, cert.passed])
        rec = res.record()
        rec.update({"C_obs_num": est.C_obs, "yT_energy": y_norm, "residual_bound": bound,
                    "residual_ok": res.residual <= bound, "optimality_ok": res.optimality_ok,
                    "uniform_lhs": cert.lhs, "uniform_rhs": cert.rhs, "uniform_passed": cert.passed})
        if cfg.solver.scheme == "direct":
            direct = solve_backward_direct(yT, res.u, coeffs, tree, grid, mask, ops=ops)
            d0 = direct.initial()
            rec["direct_residual"] = grid.h * float(np.sum(d0**2))
        records.append(rec)
    art.csv("synthesis.csv", ["epsilon", "residual", "residual_bound", "cost", "cg_iterations",
                              "cg_relative_residual", "optimality_residual", "uniform_lhs", "uniform_rhs",
                              "uniform_passed"], rows)
    art.jsonl("hum.jsonl", records)


def run_observability(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid, tree = cfg.grid(), cfg.tree()
    gram, est = _observability(cfg, coeffs, grid, tree)
    kept = np.zeros(est.obs_eigenvalues.size, dtype=bool)
    kept[est.obs_eigenvalues.size - est.kept:] = True
    top = max(est.obs_eigenvalues[-1], 1e-300)
    art.csv("spectrum.csv", ["index", "eigenvalue", "relative", "kept"],
            [[i, w, w / top, bool(k)] for i, (w, k) in enumerate(zip(est.obs_eigenvalues, kept))])
    art.jsonl("observability.jsonl", [{
        "observable": est.observable,
        "C_obs_num": est.C_obs,
        "kept": est.kept,
        "dimension": int(est.obs_eigenvalues.size),
        "symmetry_error": gram.symmetry_error,
        "min_eig_relative": gram.min_eig_relative,
        "witness_energy": est.witness_energy,
        "kernel_tol": est.info["kernel_tol"],
        "rank_tol": est.info["rank_tol"],
        "validation": _validation(cfg, coeffs),
    }])


def run_uc_probe(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid, tree = cfg.grid(), cfg.tree()
    gram = assemble_gramian(coeffs, tree, grid, cfg.mask("G0", grid))
    rep = unique_continuation_probe(gram, cfg.observability.rank_tol, cfg.observability.kernel_tol)
    art.jsonl("uc_probe.jsonl", [{
        "result": "pass" if rep.passed else "fail",
        "kernel_dim": rep.kernel_dim,
        "witness_energy": rep.witness_energy,
        "witness_component_mass": rep.witness_component_mass,
        "rank_tol": cfg.observability.rank_tol,
    }])
    if rep.witness is not None:
        w = rep.witness.reshape(coeffs.n, grid.nx)
        # fix the sign so the artifact does not depend on eigenvector orientation
        k = int(np.argmax(np.abs(w.reshape(-1))))
        w = w * np.sign(w.reshape(-1)[k])
        art.csv("uc_witness.csv", ["component", "x", "value"],
                [[i + 1, grid.x[j], w[i, j]] for i in range(coeffs.n) for j in range(grid.nx)])


def run_carleman(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid, tree = cfg.grid(), cfg.tree()
    T = cfg.problem.T
    psi = build_psi(grid, cfg.mask("G1", grid))
    lam0 = compute_lambda0(coeffs, T, cfg.carleman.C0_cal, tree, grid)
    base = eval_weights(lam0, cfg.carleman.mu, T, psi, grid, tree)
    samples = cfg.initial_samples(grid, seed)
    mask = cfg.mask("G0_tilde", grid)
    rows, summary = [], []
    for k in cfg.carleman.lambda_multipliers:
        w = base.with_lambda(k * lam0)
        chk = carleman_check_cascade(coeffs, tree, grid, w, cfg.l_exponent, samples, mask, cfg.carleman.C0_cal)
        for r in chk.rows:
            rows.append([r["sample"], r["lambda"], r["LHS"], r["RHS"], r["ratio"], r["log_LHS"], r["log_RHS"], r["status"]])
        summary.append({"kind": "cascade", "lambda": w.lam, "multiplier": k, "max_ratio": chk.max_ratio,
                        "violations": len(chk.violations)})
    ratios = [s["max_ratio"] for s in summary if np.isfinite(s["max_ratio"]) and s["max_ratio"] > 0]
    spread = max(ratios) / min(ratios) if len(ratios) == len(summary) and ratios else float("inf")
    summary.append({"kind": "sweep", "lambda0": lam0, "mu": cfg.carleman.mu, "l": cfg.l_exponent,
                    "ratio_spread": spread, "alpha_rate_constant": alpha_rate_constant(base)})
    art.csv("carleman.csv", ["sample", "lambda", "LHS", "RHS", "ratio", "log_LHS", "log_RHS", "status"], rows)

    single_rows = []
    if coeffs.n == 1:
        lam_s = max(lam0, cfg.carleman.C2_cal * (T + T**2))
        for k in cfg.carleman.lambda_multipliers:
            w = base.with_lambda(k * lam_s)
            for d in cfg.carleman.single_d:
                for s, z0 in enumerate(samples):
                    chk = carleman_check_single(d, None, z0, coeffs, tree, grid, w, mask, cfg.carleman.C2_cal)
                    single_rows.append([s, w.lam, d, chk.ratio, chk.log_lhs, chk.log_rhs, chk.status])
        art.csv("carleman_single.csv", ["sample", "lambda", "d", "ratio", "log_LHS", "log_RHS", "status"], single_rows)
    art.jsonl("carleman.jsonl", summary)


def run_cost_sweep(cfg, art, seed):
    coeffs = cfg.coefficients_model()
    grid = cfg.grid()
    rows = cost_sweep(cfg.observability.sweep_T, coeffs, cfg.problem.depth, grid, cfg.mask("G0", grid),
                      cfg.observability.rank_tol, cfg.observability.kernel_tol)
    art.csv("cost_sweep.csv", ["T", "C_obs_num", "K", "logC", "C0_fit"],
            [[r.T, r.C_obs_num, r.K, r.logC, r.C0_fit] for r in rows])
    decreasing = all(b.C_obs_num < a.C_obs_num for a, b in zip(rows, rows[1:]))
    art.jsonl("cost_sweep.jsonl", [{"strictly_decreasing": decreasing, "C0_fit": rows[0].C0_fit}])


RUNNERS = {
    "solve-adjoint": run_solve_adjoint,
    "synthesize": run_synthesize,
    "observability": run_observability,
    "uc-probe": run_uc_probe,
    "carleman": run_carleman,
    "cost-sweep": run_cost_sweep,
}


def run(subcommand: str, cfg: ExperimentConfig, out_dir: str | None = None, seed: int | None = None) -> Artifacts:
    if seed is not None:
        cfg.data.seed = seed
    art = Artifacts(out_dir or cfg.output.directory, cfg.output.formats)
    art.text("config.toml", serialize(cfg))
    RUNNERS[subcommand](cfg, art, cfg.data.seed)
    return art


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascade-hum", description="Null-control laboratory for stochastic parabolic cascades.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="TOML experiment configuration")
    p.add_argument("--out", default=None, help="output directory (default: output.directory from the config)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed (default: data.seed, 42)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        art = run(args.subcommand, cfg, args.out, args.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in art.written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
