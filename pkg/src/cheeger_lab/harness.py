"""Experiment orchestration: config validation, seeded sweeps, persistence.

A sweep runs (n, trial) tasks, each fully determined by the config and the
master seed: sample a cloud, build the proximity graph, solve for the
Cheeger cut, and compare the ratio and the cut against the continuum
references. Each task writes one JSON record; re-running a partially
completed sweep skips existing records, and the run digest (a hash of the
records minus timings) is independent of the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .consistency import (cut_l1_error, fit_rate, schedule_exponents)
from .cut_solvers import (solve_arc_sweep, solve_exact, solve_pipeline,
                          solve_spectral_sweep)
from .errors import ConfigError, MissingColumns
from .manifold import continuum_cheeger, get_manifold
from .nonlocal_tv import surface_tension
from .proximity_graph import build_graph
from .quadrature import build_grid

SUMMARY_COLUMNS = ["n", "epsilon", "trial_seed", "cheeger_ratio",
                   "continuum_ref", "abs_error", "l1_cut_error",
                   "sup_displacement", "method", "certificate", "elapsed_sec"]

_SOLVERS = {"pipeline": solve_pipeline, "exact": solve_exact,
            "spectral": solve_spectral_sweep, "arc": solve_arc_sweep}


@dataclass
class ExperimentConfig:
    manifold: str
    n_list: list
    trials: int
    seed: int
    out: str
    solver: str = "pipeline"
    objective: str = "cheeger"
    # schedule: explicit epsilons (aligned with n_list) or eps = c * n^{-k}
    epsilons: list = None
    epsilon_c: float = 2.0
    epsilon_k: float = None          # default 3/(2+4m)
    log_correction: bool = False     # multiply by log(n)^{1/m}
    grid_resolution: int = 800
    schedule_meta: dict = field(default_factory=dict)

    def epsilon(self, n):
        if self.epsilons is not None:
            return float(self.epsilons[list(self.n_list).index(n)])
        k = self.epsilon_k
        eps = self.epsilon_c * float(n) ** (-k)
        if self.log_correction:
            m = get_manifold(self.manifold).m
            eps *= np.log(float(n)) ** (1.0 / m)
        return float(eps)

    def bandwidth(self, n):
        """Smoothing bandwidth from the scale trade-off: a = eps^(1/3)."""
        return self.epsilon(n) ** (1.0 / 3.0)

    def resolved(self):
        d = asdict(self)
        d["epsilon_by_n"] = {str(n): self.epsilon(n) for n in self.n_list}
        return d


def validate_config(source) -> ExperimentConfig:
    """Build a config from a dict or a JSON file path; collect all errors."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            raw = json.load(fh)
    else:
        raw = dict(source)
    errors = []
    name = raw.get("manifold")
    mf = None
    if not name:
        errors.append("manifold required")
    else:
        try:
            mf = get_manifold(name)
        except ValueError as exc:
            errors.append(str(exc))
    n_list = raw.get("n_list")
    if not n_list:
        errors.append("n_list required")
    else:
        bad = [n for n in n_list if int(n) < 8]
        if bad:
            errors.append(f"all n must be >= 8; offending n: {bad}")
    trials = int(raw.get("trials", 0))
    if trials < 1:
        errors.append("trials must be >= 1")
    if "seed" not in raw:
        errors.append("seed required")
    if not raw.get("out"):
        errors.append("out (output directory) required")
    solver = raw.get("solver", "pipeline")
    if solver not in _SOLVERS:
        errors.append(f"unknown solver {solver!r}; expected one of {sorted(_SOLVERS)}")
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(
        manifold=name, n_list=[int(n) for n in n_list], trials=trials,
        seed=int(raw["seed"]), out=str(raw["out"]), solver=solver,
        objective=raw.get("objective", "cheeger"),
        epsilons=raw.get("epsilons"),
        epsilon_c=float(raw.get("epsilon_c", 2.0)),
        epsilon_k=raw.get("epsilon_k"),
        log_correction=bool(raw.get("log_correction", False)),
        grid_resolution=int(raw.get("grid_resolution", 800)))
    if cfg.epsilon_k is None:
        cfg.epsilon_k = 3.0 / (2.0 + 4.0 * mf.m)
    cfg.schedule_meta = schedule_exponents(mf.m)
    if cfg.epsilons is not None and len(cfg.epsilons) != len(cfg.n_list):
        raise ConfigError(["epsilons must align with n_list"])
    bad = [n for n in cfg.n_list if cfg.epsilon(n) > mf.epsilon0]
    if bad:
        raise ConfigError(
            [f"epsilon(n={n}) = {cfg.epsilon(n):.4g} exceeds the manifold "
             f"limit {mf.epsilon0}" for n in bad])
    return cfg


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------

def trial_seed(master, n, trial):
    """Stable 62-bit seed derived from (master seed, n, trial index)."""
    digest = hashlib.sha256(f"{master}:{n}:{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 2


def _record_path(out_dir, n, trial):
    return Path(out_dir) / f"record_n{n}_t{trial}.json"


def run_trial(cfg: ExperimentConfig, n, trial) -> dict:
    mf = get_manifold(cfg.manifold)
    seed = trial_seed(cfg.seed, n, trial)
    eps = cfg.epsilon(n)
    cloud = mf.sample(n, seed=seed)
    graph = build_graph(cloud, eps)
    solver = _SOLVERS[cfg.solver]
    if cfg.solver in ("pipeline", "spectral"):
        result = solver(graph, seed=seed)
    else:
        result = solver(graph)
    ref = continuum_cheeger(mf)
    target = surface_tension(mf.m) * ref.constant
    grid = build_grid(mf, cfg.grid_resolution if mf.name == "circle"
                      else (96 if mf.name == "flat_torus_2" else 4000))
    a = cfg.bandwidth(n)
    err = cut_l1_error(result, cloud, ref, a=a, grid=grid)
    delta = err.sup_displacement
    kappa = eps ** (1.0 / 6.0) + delta / eps  # density-fluctuation term unmeasured
    rec = {
        "config_hash": config_hash(cfg), "n": int(n), "trial": int(trial),
        "epsilon": eps, "a": a, "trial_seed": int(seed),
        "cheeger_ratio": float(result.objective_value),
        "continuum_ref": float(target),
        "abs_error": abs(float(result.objective_value) - float(target)),
        "l1_cut_error": float(err.l1_error),
        "discrete_cut_error": float(err.discrete_error),
        "sup_displacement": float(delta), "kappa": float(kappa),
        "theta_measured": False,
        "method": cfg.solver, "certificate": result.certificate,
        "elapsed_sec": float(result.elapsed),
    }
    return rec


def config_hash(cfg: ExperimentConfig):
    d = cfg.resolved()
    d.pop("out", None)  # the output location does not affect the results
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _worker(args):
    cfg_dict, n, trial, out_dir = args
    cfg = ExperimentConfig(**cfg_dict)
    path = _record_path(out_dir, n, trial)
    if path.exists():
        return str(path)
    try:
        rec = run_trial(cfg, n, trial)
    except Exception as exc:  # noqa: BLE001 - per-trial isolation
        rec = {"n": int(n), "trial": int(trial), "failed": True,
               "error": f"{type(exc).__name__}: {exc}"}
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)
    return str(path)


def default_workers():
    env = os.environ.get("CHEEGER_LAB_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def run_experiment(cfg: ExperimentConfig, workers=None) -> dict:
    """Execute the sweep; returns {records, rates, digest, summary_path}."""
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = workers or default_workers()
    tasks = [(asdict(cfg), n, t, str(out_dir))
             for n in cfg.n_list for t in range(cfg.trials)]
    pending = [t for t in tasks if not _record_path(out_dir, t[1], t[2]).exists()]
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_worker, pending))
    else:
        for t in pending:
            _worker(t)
    # deterministic aggregation pass
    records = []
    for n in cfg.n_list:
        for t in range(cfg.trials):
            with open(_record_path(out_dir, n, t)) as fh:
                records.append(json.load(fh))
    good = [r for r in records if not r.get("failed")]
    _write_summary(out_dir / "summary.csv", good)
    rates = _write_rates(out_dir / "rates.json", cfg, good)
    digest = run_digest(records)
    with open(out_dir / "digest.txt", "w") as fh:
        fh.write(digest + "\n")
    return {"records": records, "rates": rates, "digest": digest,
            "summary_path": str(out_dir / "summary.csv")}


def run_digest(records):
    """Hash of the records with timing fields removed."""
    canon = []
    for r in sorted(records, key=lambda r: (r["n"], r["trial"])):
        r = {k: v for k, v in r.items() if k != "elapsed_sec"}
        canon.append(json.dumps(r, sort_keys=True))
    return hashlib.sha256("\n".join(canon).encode()).hexdigest()


def _write_summary(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in sorted(records, key=lambda r: (r["n"], r["trial"])):
            w.writerow([r["n"], repr(r["epsilon"]), r["trial_seed"],
                        repr(r["cheeger_ratio"]), repr(r["continuum_ref"]),
                        repr(r["abs_error"]), repr(r["l1_cut_error"]),
                        repr(r["sup_displacement"]), r["method"],
                        r["certificate"], f"{r['elapsed_sec']:.3f}"])


def _write_rates(path, cfg, records):
    mf = get_manifold(cfg.manifold)
    out = {"schedule": cfg.schedule_meta, "epsilon_rule":
           {"c": cfg.epsilon_c, "k": cfg.epsilon_k,
            "log_correction": cfg.log_correction}}
    for key in ("abs_error", "l1_cut_error"):
        by_n = {}
        for r in records:
            by_n.setdefault(r["n"], []).append(r[key])
        try:
            rr = fit_rate(by_n, m=mf.m, seed=cfg.seed)
            out[key] = rr.as_dict()
        except Exception as exc:  # noqa: BLE001 - report, don't abort
            out[key] = {"error": f"{type(exc).__name__}: {exc}"}
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    return out


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def emit_plot_data(summary_path, kind, out_dir) -> dict:
    """Write TSV plot data and a self-contained SVG for a summary file."""
    rows = _read_summary(summary_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    column = {"rate_loglog": "abs_error", "cut_error": "l1_cut_error",
              "concentration": "cheeger_ratio"}.get(kind)
    if column is None:
        raise ValueError(f"unknown plot kind {kind!r}")
    by_n = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r[column]))
    ns = sorted(by_n)
    if kind == "concentration":
        ys = [float(np.mean(by_n[n])) for n in ns]
        sig = [float(np.std(by_n[n], ddof=1)) if len(by_n[n]) > 1 else 0.0
               for n in ns]
    else:
        ys = [float(np.median(by_n[n])) for n in ns]
        sig = [float(np.std(by_n[n], ddof=1)) if len(by_n[n]) > 1 else 0.0
               for n in ns]
    tsv = out_dir / f"{kind}.tsv"
    with open(tsv, "w") as fh:
        fh.write("x\ty\tsigma\n")
        for n, y, s in zip(ns, ys, sig):
            fh.write(f"{n}\t{y!r}\t{s!r}\n")
    meta = {"kind": kind, "tsv": str(tsv), "n": ns, "y": ys}
    if kind in ("rate_loglog", "cut_error") and len(ns) >= 2:
        x = np.log(np.asarray(ns, float))
        yl = np.log(np.maximum(ys, 1e-300))
        A = np.stack([x, np.ones_like(x)], axis=1)
        coef, *_ = np.linalg.lstsq(A, yl, rcond=None)
        meta["slope"] = float(coef[0])
        meta["monotone_decreasing"] = bool(all(b <= a for a, b in zip(ys, ys[1:])))
        svg = out_dir / f"{kind}.svg"
        _write_loglog_svg(svg, ns, ys, coef)
        meta["svg"] = str(svg)
    with open(out_dir / f"{kind}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return meta


def _read_summary(summary_path):
    with open(summary_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise MissingColumns("summary file has no data rows")
    missing = [c for c in ("n",) if c not in rows[0]]
    if missing:
        raise MissingColumns(f"summary missing columns: {missing}")
    return rows


def _write_loglog_svg(path, ns, ys, coef, width=480, height=360):
    x = np.log10(np.asarray(ns, float))
    y = np.log10(np.maximum(ys, 1e-300))
    pad = 50

    def sx(v):
        lo, hi = x.min(), x.max()
        return pad + (v - lo) / max(hi - lo, 1e-9) * (width - 2 * pad)

    def sy(v):
        lo, hi = y.min(), y.max()
        return height - pad - (v - lo) / max(hi - lo, 1e-9) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" '
             f'y2="{height-pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" '
             f'stroke="black"/>']
    for xi, yi in zip(x, y):
        parts.append(f'<circle cx="{sx(xi):.1f}" cy="{sy(yi):.1f}" r="4" '
                     f'fill="steelblue"/>')
    # fitted line in natural log space: ln y = a ln n + b
    a, b = coef
    yfit = (a * np.log(np.asarray(ns, float)) + b) / np.log(10.0)
    pts = " ".join(f"{sx(xi):.1f},{sy(yi):.1f}" for xi, yi in zip(x, yfit))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="crimson" '
                 f'stroke-dasharray="5,3"/>')
    parts.append(f'<text x="{pad}" y="{pad-15}" font-family="monospace" '
                 f'font-size="13">slope = {a:.3f}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
