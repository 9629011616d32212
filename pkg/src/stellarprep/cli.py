"""Command-line driver: ``stellarprep {exact,pimc,optimize,circuitize,verify,pipeline}``.

Every run reads one JSON configuration, writes CSV tables (each starting with
a ``# config_hash=... seed=...`` comment line), QASM files and a JSON run
manifest into ``--out``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__, ansatz, circuits, fock, momentopt, pimc
from .estimators import parse_observable

log = logging.getLogger("stellarprep")

DEFAULTS = {
    "seed": 20240611,
    "physics": {"model": "lattice", "m_sq": 0.6, "lambda_coupling": 1.5, "sigma": 1.0, "N": 10},
    "exact": {"lam": 150, "lam_lattice": 10, "p_max_total": 8, "table1": False},
    "pimc": {
        "theta": [0.4, 0.2, 0.1],
        "T": 10.0,
        "n_samples": 2000,
        "n_bootstrap": 200,
        "seed": None,
        "burn_in": 1000,
        "n_overrelax": 2,
        "iac_target": 1.6,
        "window": None,
    },
    "ansatz": {"R": 4, "Q": 2},
    "optimization": {"preset": "moment_ratio", "weights": None, "targets": None, "column": 2, "restarts": 4,
                     "n_resamples": 0},
    "circuit": {"F0": 0.9, "scheme": "unary", "lam_max": 60, "max_sim_qubits": 64},
}

PRESETS = ("moment_ratio", "two_point", "columns", "energy")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"{path}{k}: unknown key")
        if isinstance(base[k], dict) and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{path}{k}: expected an object")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _need(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_config(cfg: dict) -> dict:
    """Fill defaults and check types and cross-field constraints."""
    cfg = _merge(DEFAULTS, cfg or {})
    ph = cfg["physics"]
    _need(ph["model"] in ("lattice", "oscillator"), "physics.model", "must be 'lattice' or 'oscillator'")
    for k in ("m_sq", "lambda_coupling", "sigma"):
        _need(_is_num(ph[k]), f"physics.{k}", "must be a finite number")
    _need(ph["lambda_coupling"] >= 0, "physics.lambda_coupling", "must be non-negative")
    _need(isinstance(ph["N"], int) and ph["N"] >= 1, "physics.N", "must be a positive integer")
    if ph["model"] == "oscillator":
        ph["N"] = 1
    else:
        _need(ph["N"] >= 2, "physics.N", "a lattice needs at least two sites")
        _need(ph["m_sq"] > 0, "physics.m_sq", "must be positive for the lattice")

    an = cfg["ansatz"]
    _need(isinstance(an["R"], int) and an["R"] >= 0 and an["R"] % 2 == 0, "ansatz.R", "must be an even non-negative integer")
    _need(isinstance(an["Q"], int) and an["Q"] >= 1, "ansatz.Q", "must be a positive integer")
    if ph["model"] == "lattice":
        _need(an["Q"] <= ph["N"] // 2, "ansatz.Q", "must not exceed N/2")

    pm = cfg["pimc"]
    _need(isinstance(pm["theta"], list) and len(pm["theta"]) >= 1, "pimc.theta", "must be a non-empty list")
    for i, th in enumerate(pm["theta"]):
        _need(_is_num(th) and th > 0, f"pimc.theta[{i}]", "must be positive")
        M = pm["T"] / th
        _need(abs(M - round(M)) < 1e-9 and round(M) >= 2, f"pimc.theta[{i}]", "T/theta must be an integer >= 2")
    _need(isinstance(pm["n_samples"], int) and pm["n_samples"] >= 201, "pimc.n_samples", "must be an integer > 200")
    _need(isinstance(pm["n_bootstrap"], int) and pm["n_bootstrap"] >= 100, "pimc.n_bootstrap", "must be >= 100")

    op = cfg["optimization"]
    _need(op["preset"] in PRESETS, "optimization.preset", f"must be one of {PRESETS}")
    if op["weights"] is not None:
        _need(isinstance(op["weights"], list) and all(_is_num(w) and w >= 0 for w in op["weights"]),
              "optimization.weights", "must be a list of non-negative numbers")
    if op["targets"] is not None:
        _need(isinstance(op["targets"], list), "optimization.targets", "must be a list")
        for i, t in enumerate(op["targets"]):
            _need(isinstance(t, dict) and "observable" in t and "target" in t,
                  f"optimization.targets[{i}]", "needs 'observable' and 'target'")
    _need(isinstance(op["column"], int) and op["column"] >= 0 and op["column"] % 2 == 0,
          "optimization.column", "must be an even non-negative integer")
    _need(isinstance(op["n_resamples"], int) and op["n_resamples"] >= 0, "optimization.n_resamples", "must be >= 0")

    ci = cfg["circuit"]
    _need(_is_num(ci["F0"]) and 0 < ci["F0"] < 1, "circuit.F0", "must lie in (0, 1)")
    _need(ci["scheme"] in ("unary", "binary"), "circuit.scheme", "must be 'unary' or 'binary'")
    _need(isinstance(ci["lam_max"], int) and ci["lam_max"] >= an["R"], "circuit.lam_max", "must be an integer >= R")
    _need(isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    return cfg


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return validate_config({})
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def substream(seed: int, name: str) -> int:
    """Deterministic 63-bit seed for the named sub-stream of ``seed``."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


class Run:
    def __init__(self, cfg: dict, out: Path, command: str, threads: int):
        self.cfg = cfg
        self.out = out
        self.command = command
        self.threads = threads
        self.hash = config_hash(cfg)
        self.outputs: List[str] = []
        self.notes: Dict[str, object] = {}
        self.status = "ok"
        self.start = time.time()
        out.mkdir(parents=True, exist_ok=True)

    def _fmt(self, v):
        if isinstance(v, float):
            return repr(v)
        return v

    def write_csv(self, name: str, rows: List[dict], columns: Optional[List[str]] = None) -> Path:
        path = self.out / name
        columns = columns or (list(rows[0]) if rows else [])
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.hash} seed={self.cfg['seed']}\n")
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: self._fmt(r.get(k, "")) for k in columns})
        self.outputs.append(name)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.outputs.append(name)
        return path

    def manifest(self):
        doc = {
            "version": __version__,
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.cfg["seed"],
            "threads": self.threads,
            "status": self.status,
            "outputs": sorted(set(self.outputs)),
            "notes": self.notes,
            "config": self.cfg,
        }
        (self.out / f"manifest_{self.command}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_csv(path) -> List[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

TABLE1_ROWS = [(1.0, 5.0), (1.0, 10.0), (-1.0, 0.2), (-1.0, 0.1)]


def _oscillator_moments(ground, lam, p_max_total):
    rows = []
    for q in range(0, p_max_total + 1, 2):
        for obs in momentopt.column_observables(q, p_max_total):
            rows.append({"observable": obs.name(), "value": momentopt.exact_moment(ground, lam, obs)})
    return rows


def table1_rows(lam: int = 150) -> List[dict]:
    """Fidelity and ``delta_E`` of the minimum-energy ansatz for the single-mode table."""
    out = []
    for sigma, lam_c in TABLE1_ROWS:
        model = ansatz.OscillatorModel(sigma, lam_c)
        spec = fock.exact_ground(model.hamiltonian(lam))
        for R in (0, 2, 4):
            tm = ansatz.enumerate_core_template(R, 0, 1)
            params, e = ansatz.minimize_energy(tm, model)
            vec = ansatz.build_state(params, fock.FockCutoff(lam, 1))
            out.append({
                "sigma": sigma,
                "lambda": lam_c,
                "R": R,
                "r": params.r,
                "fidelity": fock.fidelity(vec, spec.ground),
                "delta_E_percent": 100 * momentopt.delta_E(e, spec.e0, spec.e1),
            })
    return out


def cmd_exact(run: Run) -> None:
    cfg = run.cfg
    ph, ex = cfg["physics"], cfg["exact"]
    if ph["model"] == "oscillator":
        lam = ex["lam"]
        H = ansatz.OscillatorModel(ph["sigma"], ph["lambda_coupling"]).hamiltonian(lam)
        spec = fock.exact_ground(H)
        run.write_csv("exact_spectrum.csv", [{"level": i, "energy": float(e)} for i, e in enumerate(spec.energies)])
        run.write_csv("exact_moments.csv", _oscillator_moments(spec.ground, lam, ex["p_max_total"]))
    else:
        lam = ex["lam_lattice"]
        N = ph["N"]
        cut = fock.FockCutoff(lam, N)
        if cut.dim > fock.MAX_DIM:
            raise ConfigError(f"exact.lam_lattice: {lam + 1}^{N} states exceed the exact-solver limit")
        H = fock.hamiltonian_1p1(ph["m_sq"], ph["lambda_coupling"], cut)
        spec = fock.exact_ground(H, symmetry_sector=None)
        run.write_csv("exact_spectrum.csv", [{"level": i, "energy": float(e)} for i, e in enumerate(spec.energies)])
        rows = []
        for name, obs in (("phi2", ansatz.ObservableSpec.phi(2)), ("phi4", ansatz.ObservableSpec.phi(4)),
                          ("pi2", ansatz.ObservableSpec.pi(2))) + tuple(
                (f"phi0phi{j}", ansatz.ObservableSpec.two_point(j)) for j in range(1, N // 2 + 1)):
            rows.append({"observable": name, "value": ansatz.dense_expectation(spec.ground, obs, cut).real})
        run.write_csv("exact_moments.csv", rows)
    if ex["table1"]:
        run.write_csv("table1.csv", table1_rows(ex["lam"]))


def _pimc_one(args):
    shape, m_sq, lam_c, pm, seed = args
    return pimc.sample_chain(
        shape, m_sq, lam_c, pm["n_samples"], burn_in=pm["burn_in"], seed=seed,
        iac_target=pm["iac_target"], n_overrelax=pm["n_overrelax"],
    )


def cmd_pimc(run: Run) -> Dict[str, tuple]:
    cfg = run.cfg
    ph, pm = cfg["physics"], cfg["pimc"]
    if ph["model"] != "lattice":
        raise ConfigError("physics.model: pimc runs on the lattice model")
    N, m_sq, lam_c = ph["N"], ph["m_sq"], ph["lambda_coupling"]
    base_seed = pm["seed"] if pm["seed"] is not None else substream(cfg["seed"], "chain")
    jobs = []
    for i, th in enumerate(pm["theta"]):
        shape = pimc.LatticeShape.from_T(N, pm["T"], th)
        jobs.append((shape, m_sq, lam_c, pm, substream(base_seed, f"chain-{i}")))
    with ThreadPoolExecutor(max_workers=max(1, run.threads)) as pool:
        ensembles = list(pool.map(_pimc_one, jobs))

    nb = pm["n_bootstrap"]
    per_theta: Dict[str, list] = {}
    rows = []
    diag = []
    for th, ens in zip(pm["theta"], ensembles):
        bseed = substream(cfg["seed"], f"bootstrap-{th!r}")
        est = {}
        for p in (2, 4, 6, 8, 10):
            est[f"phi{p}"] = pimc.local_moment(ens, p, nb, bseed)
        for j in range(1, N // 2 + 1):
            est[f"phi0phi{j}"] = pimc.two_point(ens, j, nb, bseed)
        for n in (2, 3, 4, 5):
            est[f"R{2 * n}"] = pimc.moment_ratio_estimate(est[f"phi{2 * n}"], est["phi2"], n)
        est["pi2"] = pimc.virial_pi2(est["phi2"], est["phi4"], m_sq, lam_c, est["phi0phi1"])
        corr = pimc.time_correlator(ens, nb, bseed)
        meff = pimc.effective_mass(corr, pm["T"], th)
        if pm["window"]:
            window = (int(round(pm["window"][0] / th)), int(round(pm["window"][1] / th)))
        else:
            window = pimc.default_window(pm["T"], th)
        try:
            est["gap"] = pimc.plateau(meff, window)
        except ValueError:
            run.notes[f"gap_theta_{th}"] = "no usable effective-mass points"
        for k, e in est.items():
            per_theta.setdefault(k, []).append((th, e))
            rows.append({"observable": k, "theta": th, "mean": e.mean, "stderr": e.stderr,
                         "n_bootstrap": e.bootstrap_means.size, "model": "", "chi2_red_linear": "",
                         "chi2_red_quadratic": ""})
        diag.append({"theta": th, "n_samples": len(ens), "thinning": ens.thinning, "iac": ens.iac,
                     "acceptance": ens.acceptance})
    table = {}
    for k, pts in per_theta.items():
        if len(pts) >= 3:
            fit = pimc.extrapolate_theta(pts, seed=substream(cfg["seed"], f"fit-{k}"))
            e = fit.intercept
            rows.append({"observable": k, "theta": 0.0, "mean": e.mean, "stderr": e.stderr,
                         "n_bootstrap": e.bootstrap_means.size, "model": fit.model,
                         "chi2_red_linear": fit.chi2_red_linear, "chi2_red_quadratic": fit.chi2_red_quadratic})
        else:
            th, e = min(pts, key=lambda p: p[0])
        table[k] = (e.mean, e.stderr)
    cols = ["observable", "theta", "mean", "stderr", "n_bootstrap", "model", "chi2_red_linear", "chi2_red_quadratic"]
    run.write_csv("pimc_moments.csv", rows, cols)
    run.write_csv("pimc_chains.csv", diag)
    run.write_text("pimc_table.json", json.dumps({k: list(v) for k, v in sorted(table.items())}, indent=2) + "\n")
    return table


def _energy_and_gap(table: Dict[str, tuple], m_sq: float, lam_c: float, N: int):
    need = ("pi2", "phi2", "phi0phi1", "phi4", "gap")
    if not all(k in table for k in need):
        return None, None
    per_site = (table["pi2"][0] / 2 + (1 + m_sq / 2) * table["phi2"][0] - table["phi0phi1"][0]
                + lam_c / 4 * table["phi4"][0])
    e0 = N * per_site
    return e0, e0 + table["gap"][0]


def _targets(cfg: dict, table: Optional[Dict[str, tuple]]):
    op = cfg["optimization"]
    if op["targets"]:
        return [momentopt.TargetMoment(parse_observable(t["observable"]), t["target"], t.get("sigma", 0.0),
                                       t.get("weight", 1.0)) for t in op["targets"]], [1.0]
    preset = op["preset"]
    if preset == "energy":
        return [], [0.0]
    if preset == "columns":
        raise ConfigError("optimization.preset: 'columns' needs explicit targets or the oscillator exact step")
    if not table:
        raise ConfigError("optimization: no Monte Carlo table available for the preset")
    return momentopt.preset_multimode_targets(preset, table, 1.0), list(momentopt.preset_weights(preset))


def cmd_optimize(run: Run, table: Optional[Dict[str, tuple]] = None) -> Dict[float, momentopt.OptResult]:
    cfg = run.cfg
    ph, an, op = cfg["physics"], cfg["ansatz"], cfg["optimization"]
    if ph["model"] == "oscillator":
        model = ansatz.OscillatorModel(ph["sigma"], ph["lambda_coupling"])
        template = ansatz.enumerate_core_template(an["R"], 0, 1)
        spec0 = fock.exact_ground(model.hamiltonian(cfg["exact"]["lam"]))
        e0, e1 = spec0.e0, spec0.e1
        if op["preset"] == "columns" and not op["targets"]:
            base = momentopt.column_targets(op["column"], spec0.ground, cfg["exact"]["lam"])
            weights = [0.0, 1.0]
        else:
            base, weights = _targets(cfg, table)
    else:
        model = ansatz.LatticeModel(ph["m_sq"], ph["lambda_coupling"], ph["N"])
        template = ansatz.enumerate_core_template(an["R"], an["Q"], ph["N"])
        base, weights = _targets(cfg, table)
        e0, e1 = _energy_and_gap(table or {}, ph["m_sq"], ph["lambda_coupling"], ph["N"])
    if op["weights"] is not None:
        weights = op["weights"]
    if 0.0 not in weights:
        weights = [0.0] + list(weights)
    results = {}
    rows = []
    for w in weights:
        targets = [momentopt.TargetMoment(t.obs, t.target, t.sigma, t.weight * w) for t in base]
        spec = momentopt.LossSpec(model, targets, template)
        rng = np.random.default_rng(substream(cfg["seed"], f"restart-{w!r}"))
        res = momentopt.minimize(spec, init="multistart", restarts=op["restarts"], rng=rng,
                                 e0=e0, e1=e1)
        row = {"weight": w, "energy": res.energy, "loss": res.loss,
               "sq_discrepancy": float(np.sum(res.residuals**2)),
               "delta_E": res.delta_E if e0 is not None else float("nan"), "r": res.params.r}
        for t, resid in zip(targets, res.residuals):
            row[f"residual_{t.obs.name()}"] = float(resid)
        if op["n_resamples"] > 0 and any(t.sigma > 0 for t in targets):
            prop = momentopt.propagate_uncertainty(
                spec, op["n_resamples"], np.random.default_rng(substream(cfg["seed"], f"resample-{w!r}")), res)
            mean, std = prop.param_mean, prop.param_std
            row["sq_discrepancy_mean"] = float(prop.sq_discrepancy.mean())
            row["sq_discrepancy_std"] = float(prop.sq_discrepancy.std(ddof=1))
        else:
            mean = res.params.to_vector()
            std = np.zeros_like(mean)
        names = ["r"] + list(template.labels)
        for n_, m_, s_ in zip(names, mean, std):
            row[f"mean_{n_}"] = float(m_)
            row[f"std_{n_}"] = float(s_)
        rows.append(row)
        results[w] = res
        run.write_text(f"opt_w{w:g}.txt", res.to_text(spec))
    cols = list(dict.fromkeys(k for r in rows for k in r))
    run.write_csv("optimize.csv", rows, cols)
    return results


def _pick_result(results: Dict[float, momentopt.OptResult]) -> momentopt.OptResult:
    return results[max(results)]


def cmd_circuitize(run: Run, params: ansatz.AnsatzParams) -> tuple:
    cfg = run.cfg
    ci = cfg["circuit"]
    N = params.template.N
    R = params.template.R
    Q = None if N == 1 else params.template.Q
    try:
        budget = circuits.min_resources(params.r, R, Q, N, ci["F0"], lam_max=ci["lam_max"])
    except (circuits.BudgetUnreachable, circuits.BoundUnavailable) as exc:
        run.status = "failed"
        run.notes["circuitize"] = str(exc)
        run.write_csv("budget.csv", [{"r": params.r, "R": R, "Q": "" if Q is None else Q, "N": N, "F0": ci["F0"],
                                      "lam": "", "K": "", "eps_trunc": "", "eps_trott": "", "fidelity_lower": "",
                                      "status": "unreachable"}])
        raise
    enc = circuits.QubitEncoding(ci["scheme"], budget.lam)
    prep = circuits.sparse_prep(circuits.encode_core(params.core, enc))
    circ = prep
    if ci["scheme"] == "unary" and params.r != 0:
        circ = prep.compose(circuits.trotter_squeeze(params.r, enc, budget.k_layers, N))
    elif ci["scheme"] == "binary" and params.r != 0:
        run.notes["circuitize"] = "binary squeezing synthesis is not implemented; circuit holds the core only"
    circ.metadata.update({"r": params.r, "lam": budget.lam, "K": budget.k_layers, "R": R,
                          "Q": "" if Q is None else Q, "N": N})
    row = budget.csv_row()
    row["status"] = "ok"
    row.update({f"count_{k}": v for k, v in circuits.gate_counts(circ).items()})
    run.write_csv("budget.csv", [row])
    run.write_text("circuit.qasm", circuits.export_qasm(circ))
    run.write_text("circuit.meta.txt", circ.metadata_text())
    run.write_text("params.txt", ansatz.dumps_params(params))
    return budget, circ


def reference_vector(params: ansatz.AnsatzParams, lam: int, lam_ref: int = 120) -> np.ndarray:
    """Single-mode ansatz amplitudes on levels ``0..lam`` from a large-cutoff build."""
    vec = ansatz.build_state(params, fock.FockCutoff(lam_ref, 1))
    return np.asarray(vec)


def verify_single_mode(qasm_text: str, params: ansatz.AnsatzParams, lam: int, scheme: str = "unary",
                       lam_ref: int = 160) -> dict:
    """Fidelity of the QASM output with the exact (untruncated) single-mode ansatz."""
    enc = circuits.QubitEncoding(scheme, lam)
    state = circuits.simulate_qasm(qasm_text, sparse=True)
    legal, illegal = circuits.fock_vector_from_bits(state, enc, 1)
    ref = reference_vector(params, lam, lam_ref)
    ov = sum(np.conj(ref[occ[0]]) * amp for occ, amp in legal.items())
    return {
        "fidelity": float(abs(ov) ** 2),
        "illegal_weight": float(sum(abs(v) ** 2 for v in illegal.values())),
        "norm": float(sum(abs(v) ** 2 for v in state.values())),
    }


def cmd_verify(run: Run, qasm_path: Path, params: ansatz.AnsatzParams, budget_row: Optional[dict] = None) -> dict:
    text = Path(qasm_path).read_text()
    if params.template.N != 1:
        run.notes["verify"] = "skipped: state-vector verification is limited to a single mode"
        run.status = "skipped"
        rep = {"status": "skipped"}
        run.write_csv("verify.csv", [rep])
        return rep
    lam = int(budget_row["lam"]) if budget_row else cfg_lam(run)
    rep = verify_single_mode(text, params, lam, run.cfg["circuit"]["scheme"])
    bound = float(budget_row["fidelity_lower"]) if budget_row and budget_row.get("fidelity_lower") else float("nan")
    rep["fidelity_lower"] = bound
    rep["status"] = "ok" if (math.isnan(bound) or rep["fidelity"] >= bound) and rep["illegal_weight"] < 1e-12 else "failed"
    if rep["status"] != "ok":
        run.status = "failed"
    run.write_csv("verify.csv", [rep])
    return rep


def cfg_lam(run: Run) -> int:
    return run.cfg["circuit"]["lam_max"]


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stellarprep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("exact", "pimc", "optimize", "circuitize", "verify", "pipeline"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", default="stellarprep-out", help="output directory")
        sp.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
        sp.add_argument("--threads", type=int, help="worker threads (default: $STELLARPREP_THREADS or 1)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "optimize":
            sp.add_argument("--pimc-table", help="pimc_table.json from a previous pimc run")
        if name == "circuitize":
            sp.add_argument("--params", required=True, help="parameter record (opt_w*.txt or params.txt)")
        if name == "verify":
            sp.add_argument("--qasm", required=True)
            sp.add_argument("--params", required=True)
            sp.add_argument("--budget", help="budget.csv written by circuitize")
    return p


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("STELLARPREP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"STELLARPREP_THREADS={env!r} is not an integer") from None
    return 1


def _load_params(path) -> ansatz.AnsatzParams:
    text = Path(path).read_text()
    keep = [ln for ln in text.splitlines() if ln.split()[:1] and ln.split()[0] in ("R", "Q", "N", "r", "orbit")]
    return ansatz.loads_params("\n".join(keep) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").setLevel(logging.WARNING if args.verbose else logging.ERROR)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = validate_config({"seed": args.seed})["seed"]
        threads = _threads(args.threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    run = Run(cfg, Path(args.out), args.command, threads)
    try:
        if args.command == "exact":
            cmd_exact(run)
        elif args.command == "pimc":
            cmd_pimc(run)
        elif args.command == "optimize":
            table = None
            if args.pimc_table:
                table = {k: tuple(v) for k, v in json.loads(Path(args.pimc_table).read_text()).items()}
            cmd_optimize(run, table)
        elif args.command == "circuitize":
            cmd_circuitize(run, _load_params(args.params))
        elif args.command == "verify":
            budget = read_csv(args.budget)[0] if args.budget else None
            rep = cmd_verify(run, Path(args.qasm), _load_params(args.params), budget)
            print(json.dumps(rep))
        elif args.command == "pipeline":
            table = None
            if cfg["physics"]["model"] == "lattice":
                table = cmd_pimc(run)
            else:
                cmd_exact(run)
            results = cmd_optimize(run, table)
            params = _pick_result(results).params
            budget, _ = cmd_circuitize(run, params)
            cmd_verify(run, run.out / "circuit.qasm", params, read_csv(run.out / "budget.csv")[0])
    except (ConfigError, circuits.BudgetUnreachable, circuits.BoundUnavailable) as exc:
        run.status = "failed"
        run.notes["error"] = str(exc)
        run.manifest()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    run.manifest()
    if run.status == "ok":
        return 0
    print(f"run finished with status {run.status}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
