"""Experiment harness: configuration, orchestration, and persistence.

Every experiment is fully determined by its config plus a base seed; repeat
``r`` uses seed ``base + r``.  Outputs go to one directory per run: a config
snapshot, JSON-lines trace files (each record carries ``schema_version``),
and a summary CSV.
"""

from __future__ import annotations

import configparser
import csv
import json
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import bo as bo_mod
from . import gp, mps, spsa
from .circuit import (Ansatz, CXGate, EnergyEvaluator, FixedGate, RYGate,
                      build_brickwork_ry_cx, energy_batch,
                      parameter_shift_gradient)
from .errors import ConfigError
from .kernels import CLASSICAL_KINDS, KernelSpec
from .pauli import build_tfim

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = ("regress", "regress-local", "bo", "spsa", "mps-regress",
                    "feature-dim", "find-opt")


@dataclass
class ExperimentConfig:
    kind: str = "regress"
    # ansatz / hamiltonian
    n: int = 4
    depth: int = 4
    J: float = 0.5
    hx: float = -0.5
    hz: float = 0.5
    periodic: bool = True
    # kernels and data sizes
    kernels: tuple[str, ...] = ("state",)
    nt_grid: tuple[int, ...] = (10, 25, 50, 100, 136, 150, 200)
    n_v: int = 50
    scale: float = 5.0  # local-regression window half-width is pi/scale
    # noise
    shots: int | None = None
    depolarizing: float = 0.0
    # BO / SPSA
    n_init: int = 25
    n_queries: int = 80
    xi: float = 0.01
    max_evaluations: int = 1000
    e_opt: float | None = None
    attempts: int = 200
    # MPS
    chi_grid: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    block_params: int = 10
    # run control
    repeats: int = 20
    seed: int = 0
    out_dir: str = "results"
    full_scale: bool = False

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if any(nt < 1 for nt in self.nt_grid):
            raise ConfigError("training sizes must be positive")
        if self.repeats < 1 or self.n_v < 2:
            raise ConfigError("need at least one repeat and two validation points")

    @property
    def effective_repeats(self) -> int:
        return max(self.repeats, 100) if self.full_scale else self.repeats


_TUPLE_INT = {"nt_grid", "chi_grid"}
_TUPLE_STR = {"kernels"}


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read a flat INI config (single [experiment] section); keyword
    overrides win over file values."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(str(path)):
            raise ConfigError(f"cannot read config file {path}")
        # configparser lowercases keys; match field names case-insensitively
        names = {f.name.lower(): f for f in fields(ExperimentConfig)}
        for section in parser.sections():
            for key, raw in parser[section].items():
                if key.lower() not in names:
                    raise ConfigError(f"unknown config key {key!r}")
                f = names[key.lower()]
                values[f.name] = _parse_value(f.name, raw, f.type)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def _parse_value(key: str, raw: str, annotation: str):
    raw = raw.strip()
    if key in _TUPLE_INT:
        return tuple(int(x) for x in raw.replace(",", " ").split())
    if key in _TUPLE_STR:
        return tuple(x for x in raw.replace(",", " ").split())
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.lower() in ("none", ""):
        return None
    if key in ("kind", "out_dir"):
        return raw
    try:
        return int(raw)
    except ValueError:
        return float(raw)


def derive_seed(base: int, repeat: int) -> int:
    return base + repeat


def write_jsonl(path: Path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            rec = {"schema_version": SCHEMA_VERSION, **rec}
            fh.write(json.dumps(rec) + "\n")


def write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _snapshot(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        f.name: " ".join(map(str, getattr(cfg, f.name)))
        if isinstance(getattr(cfg, f.name), tuple) else str(getattr(cfg, f.name))
        for f in fields(cfg)}
    with open(out / "config.ini", "w") as fh:
        parser.write(fh)


def _problem(cfg: ExperimentConfig):
    ansatz = build_brickwork_ry_cx(cfg.n, cfg.depth)
    ham = build_tfim(cfg.n, cfg.J, cfg.hx, cfg.hz, cfg.periodic)
    return ansatz, ham


def _kernel_spec(kind: str, ansatz: Ansatz, mps_input=None) -> KernelSpec:
    if kind in CLASSICAL_KINDS:
        return KernelSpec(kind=kind)
    return KernelSpec(kind=kind, ansatz=ansatz, mps_input=mps_input)


# ---------------------------------------------------------------------------
# regression sweeps

def _sample_inputs(rng: np.random.Generator, m: int, p: int,
                   anchor: np.ndarray | None = None,
                   scale: float | None = None) -> np.ndarray:
    if anchor is None:
        return rng.uniform(-np.pi, np.pi, size=(m, p))
    half = np.pi / scale
    return anchor + rng.uniform(-half, half, size=(m, p))


def run_regression_sweep(cfg: ExperimentConfig, local: bool = False) -> list[dict]:
    """Validation-score sweep over kernels and training-set sizes.

    Global mode samples angles uniformly over the box; local mode samples
    both sets inside a window of half-width pi/scale around a fresh random
    anchor per repeat.  Energies are noiseless; hyperparameters are fitted
    by marginal likelihood (signal variance only — the data are exact)."""
    ansatz, ham = _problem(cfg)
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    rows = []
    schedule = gp.HyperSchedule(optimize_noise=False)
    for kind in cfg.kernels:
        spec = _kernel_spec(kind, ansatz)
        for repeat in range(cfg.repeats):
            seed = derive_seed(cfg.seed, repeat)
            rng = np.random.default_rng(seed)
            anchor = rng.uniform(-np.pi, np.pi, ansatz.p) if local else None
            scale = cfg.scale if local else None
            n_max = max(cfg.nt_grid)
            X_all = _sample_inputs(rng, n_max, ansatz.p, anchor, scale)
            y_all = energy_batch(ansatz, X_all, ham)
            X_v = _sample_inputs(rng, cfg.n_v, ansatz.p, anchor, scale)
            y_v = energy_batch(ansatz, X_v, ham)
            for nt in cfg.nt_grid:
                model = gp.fit(spec, X_all[:nt], y_all[:nt], mean=0.0)
                model = gp.optimize_hypers(model, schedule)
                r2 = gp.validation_score(model, X_v, y_v)
                rows.append({"kernel": kind, "n_t": nt, "repeat": repeat,
                             "seed": seed, "r2v": r2,
                             "log10_one_minus_r2v":
                                 float(np.log10(max(1.0 - r2, 1e-300)))})
    write_csv(out / "regression.csv", rows)
    write_jsonl(out / "regression.jsonl", rows)
    return rows


# ---------------------------------------------------------------------------
# optimization sweeps

def _trace_records(trace: bo_mod.BOTrace) -> list[dict]:
    return [{"iteration": r.iteration, "theta": list(map(float, r.theta)),
             "y": r.y, "best": r.best, "error": r.error, "hypers": r.hypers,
             "wall_time": r.wall_time} for r in trace.records]


def run_bo_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Repeated BO runs per kernel kind with derived seeds; persists every
    trace plus a summary CSV."""
    ansatz, ham = _problem(cfg)
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    if cfg.e_opt is None:
        warnings.warn("no reference energy supplied; error metrics omitted")
    rows = []
    for kind in cfg.kernels:
        spec = _kernel_spec(kind, ansatz)
        for repeat in range(cfg.effective_repeats):
            seed = derive_seed(cfg.seed, repeat)
            evaluator = EnergyEvaluator(ansatz, ham, shots=cfg.shots,
                                        depolarizing=cfg.depolarizing,
                                        seed=seed)
            bcfg = bo_mod.BOConfig(n_init=cfg.n_init, n_queries=cfg.n_queries,
                                   xi=cfg.xi, seed=seed,
                                   optimize_noise=cfg.shots is not None
                                   or kind in CLASSICAL_KINDS)
            trace = bo_mod.run_bo(evaluator, spec, bcfg, ansatz.p,
                                  e_opt=cfg.e_opt)
            write_jsonl(out / f"trace_bo_{kind}_{repeat}.jsonl",
                        _trace_records(trace))
            final = trace.records[-1]
            rows.append({"kernel": kind, "repeat": repeat, "seed": seed,
                         "final_best": final.best, "final_error": final.error,
                         "evaluator_calls": trace.evaluator_calls})
    write_csv(out / "bo_summary.csv", rows)
    return rows


def run_spsa_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Repeated SPSA runs from random start points with derived seeds."""
    ansatz, ham = _problem(cfg)
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    rows = []
    c = 0.2 if cfg.shots is not None else 0.1
    for repeat in range(cfg.effective_repeats):
        seed = derive_seed(cfg.seed, repeat)
        rng = np.random.default_rng(seed)
        theta0 = rng.uniform(-np.pi, np.pi, ansatz.p)
        evaluator = EnergyEvaluator(ansatz, ham, shots=cfg.shots,
                                    depolarizing=cfg.depolarizing, seed=seed)
        scfg = spsa.SPSAConfig(max_evaluations=cfg.max_evaluations, c=c,
                               seed=seed)
        trace = spsa.run_spsa(evaluator, scfg, theta0, e_opt=cfg.e_opt)
        write_jsonl(out / f"trace_spsa_{repeat}.jsonl", _trace_records(trace))
        row = {"repeat": repeat, "seed": seed,
               "final_best": trace.records[-1].best,
               "best_error": trace.records[-1].error,
               "evaluator_calls": trace.evaluator_calls}
        if cfg.e_opt is not None:
            row["trailing_mean_error"] = spsa.trailing_mean_error(trace, cfg.e_opt)
        rows.append(row)
    write_csv(out / "spsa_summary.csv", rows)
    return rows


def find_opt(cfg: ExperimentConfig) -> tuple[np.ndarray, float]:
    """Multistart gradient minimization of the noiseless energy, gradients
    by the parameter-shift rule; persists the best minimizer."""
    ansatz, ham = _problem(cfg)
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    rng = np.random.default_rng(cfg.seed)

    def objective(theta):
        val = float(energy_batch(ansatz, theta[None, :], ham)[0])
        grad = parameter_shift_gradient(ansatz, theta, ham)
        return val, grad

    best_theta, best_val = None, np.inf
    for _ in range(cfg.attempts):
        start = rng.uniform(-np.pi, np.pi, ansatz.p)
        res = minimize(objective, start, jac=True, method="L-BFGS-B",
                       bounds=[(-np.pi, np.pi)] * ansatz.p)
        if res.fun < best_val:
            best_val, best_theta = float(res.fun), res.x
    with open(out / "opt.json", "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION,
                   "theta_opt": list(map(float, best_theta)),
                   "e_opt": best_val}, fh)
    return best_theta, best_val


# ---------------------------------------------------------------------------
# MPS regression

def bound_prefix_ansatz(split: mps.BlockSplit) -> Ansatz:
    """Equivalent circuit with the prefix's rotations frozen at their fixed
    angles, so only the block's parameters remain free."""
    program = []
    for g in split.prefix.program:
        if isinstance(g, RYGate):
            program.append(FixedGate((g.qubit,),
                                     mps.ry_matrix(split.prefix_angles[g.param])))
        else:
            program.append(g)
    program.extend(split.block.program)
    return Ansatz(n=split.prefix.n, program=tuple(program))


def run_mps_regression(cfg: ExperimentConfig) -> list[dict]:
    """Validation-score sweep of the MPS-approximated state kernel over bond
    caps and training sizes, against the full state kernel.

    The circuit's trailing ``block_params`` rotations are the free
    parameters; the rest are frozen at per-repeat random angles and
    compressed into an MPS prefix at each bond cap.  Each fit is done both
    with and without the noise-variance hyperparameter; the log Bayes factor
    is taken against a full-state-kernel model on the same data."""
    ansatz, ham = _problem(cfg)
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    rows = []
    noise_sched = gp.HyperSchedule(optimize_noise=True)
    plain_sched = gp.HyperSchedule(optimize_noise=False)
    for repeat in range(cfg.repeats):
        seed = derive_seed(cfg.seed, repeat)
        rng = np.random.default_rng(seed)
        theta_full = rng.uniform(-np.pi, np.pi, ansatz.p)
        split = mps.split_last_params(ansatz, theta_full, cfg.block_params)
        effective = bound_prefix_ansatz(split)
        n_max = max(cfg.nt_grid)
        X_all = rng.uniform(-np.pi, np.pi, (n_max, cfg.block_params))
        y_all = energy_batch(effective, X_all, ham)
        X_v = rng.uniform(-np.pi, np.pi, (cfg.n_v, cfg.block_params))
        y_v = energy_batch(effective, X_v, ham)
        full_spec = KernelSpec(kind="state", ansatz=effective)
        for chi in cfg.chi_grid:
            psi = mps.compress_prefix(split, chi)
            spec = KernelSpec(kind="mps_state", ansatz=split.block,
                              mps_input=psi)
            for nt in cfg.nt_grid:
                Xt, yt = X_all[:nt], y_all[:nt]
                base = gp.fit(spec, Xt, yt, mean=0.0)
                with_noise = gp.optimize_hypers(base, noise_sched)
                without = gp.fit(replace(with_noise.kernel, noise_variance=0.0),
                                 Xt, yt, mean=0.0, engine=base.engine,
                                 features=base.features,
                                 base_gram=base.base_gram)
                without = gp.optimize_hypers(without, plain_sched)
                full = gp.optimize_hypers(gp.fit(full_spec, Xt, yt, mean=0.0),
                                          noise_sched)
                rows.append({
                    "chi": chi, "n_t": nt, "repeat": repeat, "seed": seed,
                    "r2v_noise": gp.validation_score(with_noise, X_v, y_v),
                    "r2v_plain": gp.validation_score(without, X_v, y_v),
                    "log_bayes_vs_full": gp.log_bayes_factor(with_noise, full),
                })
    write_csv(out / "mps_regression.csv", rows)
    write_jsonl(out / "mps_regression.jsonl", rows)
    return rows


# ---------------------------------------------------------------------------
# persistence cross-checks

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _last_record(path: Path) -> tuple[dict, int]:
    count = 0
    rec = None
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                count += 1
    return rec, count


def verify_persisted_summaries(out_dir: str | Path) -> list[str]:
    """Recompute each summary row from its persisted trace file and report
    any mismatches (empty list = summaries and traces agree)."""
    out = Path(out_dir)
    problems: list[str] = []

    def check(summary_path: Path, trace_name, key_fields):
        if not summary_path.exists():
            return
        for row in _read_csv(summary_path):
            trace_path = out / trace_name(row)
            if not trace_path.exists():
                problems.append(f"missing trace {trace_path.name}")
                continue
            rec, count = _last_record(trace_path)
            if int(row["evaluator_calls"]) != count:
                problems.append(
                    f"{trace_path.name}: {count} records vs "
                    f"{row['evaluator_calls']} evaluator calls")
            for summary_key, trace_key in key_fields:
                want = row[summary_key]
                got = rec[trace_key]
                if want == "" and got is None:
                    continue
                if abs(float(want) - float(got)) > 1e-12:
                    problems.append(
                        f"{trace_path.name}: {summary_key}={want} vs "
                        f"trace {got}")

    check(out / "bo_summary.csv",
          lambda row: f"trace_bo_{row['kernel']}_{row['repeat']}.jsonl",
          (("final_best", "best"), ("final_error", "error")))
    check(out / "spsa_summary.csv",
          lambda row: f"trace_spsa_{row['repeat']}.jsonl",
          (("final_best", "best"), ("best_error", "error")))
    return problems


# ---------------------------------------------------------------------------
# dimension tables

def feature_dim_table(cfg: ExperimentConfig) -> list[dict]:
    """Feature-space dimension bounds for the configured circuit family."""
    from .features import real_ansatz_dim, state_dim_bound, unitary_dim_bound
    out = Path(cfg.out_dir)
    _snapshot(cfg, out)
    rows = []
    for n in range(1, cfg.n + 1):
        for depth in range(1, cfg.depth + 1):
            if n >= 2:
                p = build_brickwork_ry_cx(n, depth).p
            else:
                p = depth
            rows.append({"n": n, "depth": depth, "p": p,
                         "state_dim_bound": state_dim_bound(n, p),
                         "unitary_dim_bound": unitary_dim_bound(n, p),
                         "real_ansatz_dim": real_ansatz_dim(n)})
    write_csv(out / "feature_dims.csv", rows)
    return rows
