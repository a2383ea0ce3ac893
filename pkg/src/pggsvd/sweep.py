"""Seeded SNR sweeps, convergence traces and their CSV/JSON emitters."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import (
    derive_seed,
    estimate_correlations,
    laplacian_correlation,
    sample_iid,
    sample_kronecker,
    snr_to_power,
    truncate_rank,
    WiretapInstance,
)
from .config import ConfigError, ExperimentConfig
from .matcore import gsvd_pair
from .miengine import MonteCarlo
from .pg_inst import (
    ConditionError,
    OptimizerConfig,
    algorithm1,
    assemble_precoder,
    complexity_count,
    gsvd_baseline,
    high_snr_pairing,
    secrecy_rate,
)
from .pg_stat import StatInstance, algorithm2, best_an_split, gsvd_stat, secrecy_lower_bound, theorem_precoder

__all__ = [
    "CSV_COLUMNS",
    "Row",
    "SweepResult",
    "build_scenario",
    "run_sweep",
    "run_convergence",
    "emit_csv",
    "emit_json",
    "rows_from_json",
]

CSV_COLUMNS = (
    "scheme", "snr_db", "rate_bob", "rate_eve", "secrecy", "std_err",
    "seed", "iterations", "complexity_additions", "wall_ms",
)


@dataclass(frozen=True)
class Row:
    scheme: str
    snr_db: float
    rate_bob: float
    rate_eve: float
    secrecy: float
    std_err: float
    seed: int
    iterations: int
    complexity_additions: int
    wall_ms: float

    def sort_key(self):
        return (self.scheme, self.seed, self.snr_db)


@dataclass
class SweepResult:
    config: dict
    rows: list = field(default_factory=list)


@dataclass
class Scenario:
    """Channel data for one seed: an instantaneous pair or Bob plus statistics."""

    seed: int
    H_ba: np.ndarray
    H_ea: np.ndarray | None = None
    R_Nt: np.ndarray | None = None
    R_Ne: np.ndarray | None = None


def build_scenario(cfg: ExperimentConfig, seed: int) -> Scenario:
    """Draw the channels for ``seed`` following the configured CSI mode.

    Statistical mode: one Bob realization, then ``L`` Eve realizations from a
    Kronecker model whose transmit side is a truncated-Laplacian ULA
    correlation; the estimated averages are rescaled with
    :meth:`KroneckerModel.normalized`.
    """
    n_t, n_r, n_e = cfg.n_t, cfg.n_r, cfg.n_e
    H_ba = sample_iid(n_r, n_t, derive_seed(seed, 0))
    if cfg["csi_mode"] == "instantaneous":
        return Scenario(seed, H_ba, H_ea=sample_iid(n_e, n_t, derive_seed(seed, 1)))
    corr = cfg["correlation"]
    aoa = corr["mean_aoa"]
    if aoa is None:
        aoa = float(np.random.default_rng([seed, 7]).uniform(-math.pi / 6, math.pi / 6))
    R_tx = laplacian_correlation(n_t, aoa, corr["angle_spread"], corr["spacing"])
    if corr["rank"] is not None:
        R_tx = truncate_rank(R_tx, corr["rank"])
    R_rx = np.eye(n_e, dtype=complex)
    draws = [sample_kronecker(R_rx, R_tx, derive_seed(seed, 1000 + i)) for i in range(corr["L"])]
    est = estimate_correlations(draws).normalized()
    return Scenario(seed, H_ba, R_Nt=est.R_Nt, R_Ne=est.R_Ne)


def _opt_cfg(cfg: ExperimentConfig, seed: int) -> OptimizerConfig:
    o = cfg["optimizer"]
    return OptimizerConfig(n_iter=o["n_iter"], eps=o["eps"], restarts=o["restarts"], seed=seed)


def _mc(cfg, seed):
    return MonteCarlo(n_samples=cfg["optimizer"]["mc_samples"], seed=seed)


def _eval_point(cfg: ExperimentConfig, sc: Scenario, fac, scheme: str, snr_db: float):
    c = cfg.constellation()
    sigma = cfg["sigma"]
    P = snr_to_power(snr_db, cfg.n_r, sigma)
    mc = _mc(cfg, sc.seed)
    n_s = cfg["N_s"]
    iterations = 0
    if cfg["csi_mode"] == "instantaneous":
        inst = WiretapInstance(sc.H_ba, sc.H_ea, P, sigma, sigma)
        if scheme == "gsvd_baseline":
            r = gsvd_baseline(fac, inst, c, mc).rates
        elif scheme == "pg_gsvd":
            res = algorithm1(inst, n_s, c, _opt_cfg(cfg, sc.seed), mc, fac)
            iterations = res.iterations
            r = secrecy_rate(res.precoder, inst, c, mc)
        else:
            perm, powers, V_s = high_snr_pairing(fac, n_s, c)
            prec = assemble_precoder(fac, perm, powers, V_s, P, n_s=n_s)
            r = secrecy_rate(prec, inst, c, mc)
        return r.rate_bob, r.rate_eve, r.secrecy, r.std_error, iterations

    stat = StatInstance(sc.H_ba, sc.R_Nt, sc.R_Ne, P, sigma, sigma)
    if scheme == "theorem_oracle":
        prec = theorem_precoder(fac, n_s, c, P)
        b = secrecy_lower_bound(prec, stat, c, mc)
        return b.bob_rate, b.eve_upper, b.lower_bound, b.std_error, 0
    res = algorithm2(stat, n_s, c, _opt_cfg(cfg, sc.seed), mc, fac)
    if scheme == "pg_gsvd":
        b = secrecy_lower_bound(res.precoder, stat, c, mc)
        return b.bob_rate, b.eve_upper, b.lower_bound, b.std_error, res.iterations
    row, _, _ = best_an_split(res.precoder, stat, c, mc=mc)
    return row["bob_rate"], row["eve_upper"], row["lower_bound"], row["std_error"], res.iterations


def _factor(cfg, sc):
    if cfg["csi_mode"] == "instantaneous":
        return gsvd_pair(sc.H_ba, sc.H_ea)
    return gsvd_stat(sc.H_ba, sc.R_Nt)


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Evaluate every ``(seed, scheme, SNR)`` point; rows come back sorted."""
    c = cfg.constellation()
    scenarios = [build_scenario(cfg, s) for s in cfg["seeds"]]
    factors = [_factor(cfg, sc) for sc in scenarios]
    if "theorem_oracle" in cfg["schemes"]:
        for fac in factors:
            n_s = min(cfg["N_s"], fac.n_t)
            if fac.r * n_s < fac.n_t:
                raise ConfigError(
                    f"schemes: theorem_oracle needs (k - N_2) * N_s >= N_t, "
                    f"got {fac.r} * {n_s} < {fac.n_t}"
                )
    tasks = [
        (sc, fac, scheme, float(snr))
        for sc, fac in zip(scenarios, factors)
        for scheme in cfg["schemes"]
        for snr in cfg["snr_grid_db"]
    ]
    timing = cfg["record_timing"]

    def work(task):
        sc, fac, scheme, snr = task
        t0 = time.perf_counter()
        rb, re, sec, se, iters = _eval_point(cfg, sc, fac, scheme, snr)
        wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        n_s = 1 if scheme == "gsvd_baseline" else cfg["N_s"]
        return Row(scheme, snr, float(rb), float(re), float(sec), float(se), sc.seed, int(iters),
                   complexity_count(cfg.n_t, n_s, c.M, scheme), round(wall, 3))

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, tasks))
    else:
        rows = [work(t) for t in tasks]
    rows.sort(key=Row.sort_key)
    return SweepResult(config=cfg.raw, rows=rows)


def run_convergence(cfg: ExperimentConfig, snr_db: float, threads: int = 1):
    """Per-iteration objective of every restart for the optimizing schemes.

    Returns ``(trace_rows, summary_rows)``. A summary row records the best
    restart's iteration count, its converged flag and the first iteration
    reaching 99% of its final objective.
    """
    c = cfg.constellation()
    trace_rows, summary = [], []
    schemes = [s for s in cfg["schemes"] if s in ("pg_gsvd", "pg_gsvd_an")]
    if not schemes:
        raise ConfigError("schemes: converge needs pg_gsvd or pg_gsvd_an")
    sigma = cfg["sigma"]
    P = snr_to_power(snr_db, cfg.n_r, sigma)

    def work(item):
        seed, scheme = item
        sc = build_scenario(cfg, seed)
        fac = _factor(cfg, sc)
        mc = _mc(cfg, seed)
        if cfg["csi_mode"] == "instantaneous":
            inst = WiretapInstance(sc.H_ba, sc.H_ea, P, sigma, sigma)
            return seed, scheme, algorithm1(inst, cfg["N_s"], c, _opt_cfg(cfg, seed), mc, fac)
        stat = StatInstance(sc.H_ba, sc.R_Nt, sc.R_Ne, P, sigma, sigma)
        return seed, scheme, algorithm2(stat, cfg["N_s"], c, _opt_cfg(cfg, seed), mc, fac)

    items = [(seed, s) for seed in cfg["seeds"] for s in schemes]
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(work, items))
    else:
        outs = [work(i) for i in items]
    for seed, scheme, res in outs:
        for restart, trace in enumerate(res.traces):
            for it, val in enumerate(trace):
                trace_rows.append({"scheme": scheme, "seed": seed, "restart": restart,
                                   "iteration": it, "objective": float(val)})
        summary.append({
            "scheme": scheme,
            "seed": seed,
            "best_restart": res.restart,
            "iterations": res.iterations,
            "converged": bool(res.converged),
            "iterations_to_99pct": _iters_to_fraction(res.trace, 0.99),
            "final_objective": float(res.objective),
        })
    trace_rows.sort(key=lambda r: (r["scheme"], r["seed"], r["restart"], r["iteration"]))
    summary.sort(key=lambda r: (r["scheme"], r["seed"]))
    return trace_rows, summary


def _iters_to_fraction(trace, frac):
    start, final = trace[0], trace[-1]
    if final <= start:
        return 0
    target = start + frac * (final - start)
    for i, v in enumerate(trace):
        if v >= target:
            return i
    return len(trace) - 1


def _csv(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def emit_csv(rows, columns=CSV_COLUMNS) -> str:
    """CSV text with a header; floats use their shortest round-trip form."""
    return _csv([asdict(r) if isinstance(r, Row) else r for r in rows], columns)


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def emit_json(payload) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    if isinstance(payload, SweepResult):
        payload = {"config": payload.config, "rows": [asdict(r) for r in payload.rows]}
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def rows_from_json(text: str):
    data = json.loads(text)
    return data.get("config"), [Row(**r) for r in data["rows"]]
