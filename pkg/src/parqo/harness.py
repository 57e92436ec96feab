"""Monte-Carlo experiment runner.

Two experiments are supported:

* ``gaussian``: random ``M x N`` complex Gaussian systems ``y = A x``,
  solved with the vector solvers;
* ``mimo``: joint precoding and PAR reduction on random MU-MIMO-OFDM
  channels and 16-QAM symbol grids.

Each trial draws from its own seeded streams, so results do not depend on
worker count or scheduling. Per-iteration PAR and PINC samples are pooled
over trials (and, for ``mimo``, over antennas) and summarized at the
configured percentile.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import json
import math

import numpy as np

from . import __version__
from .errors import ConfigError
from .jpp import JppConfig, _linf_objective, grid_energy, solve_jpp
from .metrics import EmpiricalDistribution, db, tradeoff_constant
from .ofdm import ToneProjector, freq_to_time, gen_channel, gen_symbols, make_tone_plan
from .solvers import LinearSystem, SolverConfig, solve_drs_linf, solve_fbs_lplq, solve_ls
from .streams import complex_normal, trial_rng


def parse_algorithm(spec):
    """``"lplq:P:Q"`` or ``"linf"`` -> ``(name, p, q)`` with a canonical label."""
    parts = spec.strip().split(":")
    if parts == ["linf"]:
        return "linf", math.inf, 2.0
    if parts[0] == "lplq" and len(parts) == 3:
        try:
            p, q = float(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError(f"bad algorithm spec {spec!r}") from None
        if not (1 <= q < p < math.inf):
            raise ConfigError(f"{spec!r}: need 1 <= q < p < inf")
        return "lplq", p, q
    raise ConfigError(f"bad algorithm spec {spec!r} (use lplq:P:Q or linf)")


def algorithm_label(spec):
    name, p, q = parse_algorithm(spec)
    return "linf" if name == "linf" else f"lplq:{p:g}:{q:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment description; the output is a pure function of it.

    ``bound_iters`` is the DRS iteration count used for the trade-off
    constant. For ``mimo`` the constant is computed on the first
    ``bound_trials`` trials only (0 disables it).
    """

    kind: str = "gaussian"
    algorithms: tuple = ("lplq:4:2", "lplq:2:1", "linf")
    k_max: int = 20
    trials: int = 1
    seed: int = 1
    percentile: float = 99.0
    M: int = 100
    N: int = 200
    B: int = 128
    U: int = 16
    W: int = 2048
    L: int = 4
    plan_profile: str = "lte20"
    workers: int = 1
    tau: float | None = None
    bound_iters: int | None = None
    bound_trials: int = 1
    stop_objective: float | None = None
    unit_tap_variance: bool = False

    def __post_init__(self):
        algs = tuple(self.algorithms)
        object.__setattr__(self, "algorithms", algs)
        if self.kind not in ("gaussian", "mimo"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not algs:
            raise ConfigError("at least one algorithm is required")
        labels = [algorithm_label(a) for a in algs]
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate algorithms")
        if self.trials < 1 or self.k_max < 1 or self.workers < 1:
            raise ConfigError("trials, k_max and workers must be positive")
        if not 0 < self.percentile < 100:
            raise ConfigError("percentile must lie in (0, 100)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.bound_iters is not None and self.bound_iters < 0:
            raise ConfigError("bound_iters must be non-negative")
        if self.bound_trials < 0:
            raise ConfigError("bound_trials must be non-negative")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.kind == "gaussian":
            if not 1 <= self.M <= self.N:
                raise ConfigError(f"need 1 <= M <= N, got M={self.M}, N={self.N}")
        else:
            if not 1 <= self.U < self.B:
                raise ConfigError(f"need fewer users than antennas (U={self.U}, B={self.B})")
            if not 1 <= self.L <= self.W:
                raise ConfigError("need 1 <= L <= W")
            make_tone_plan(self.W, self.plan_profile)

    @property
    def labels(self):
        return [algorithm_label(a) for a in self.algorithms]

    @property
    def effective_bound_iters(self):
        if self.bound_iters is not None:
            return self.bound_iters
        return 100_000 if self.kind == "gaussian" else 200

    def echo(self):
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        return d


@dataclass
class AlgorithmCurve:
    par_db: np.ndarray
    pinc_db: np.ndarray
    objective_mean: np.ndarray

    @property
    def iterations(self):
        return np.arange(1, len(self.par_db) + 1)


@dataclass
class TradeoffCurve:
    """Percentile trade-off trajectories, one per algorithm.

    ``bound_db`` is ``10 log10(c)`` of the trade-off constant (the smallest
    over the trials it was computed for), or NaN when not computed.
    """

    percentile: float
    curves: dict
    bound_db: float = math.nan
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def algorithms(self):
        return list(self.curves)

    def rows(self):
        for name, c in self.curves.items():
            for k in range(len(c.par_db)):
                yield (name, k + 1, float(c.par_db[k]), float(c.pinc_db[k]),
                       float(c.objective_mean[k]), float(self.bound_db))


def _summarize(cfg, labels, par_samples, pinc_samples, objectives):
    """Reduce per-trial arrays (already in trial order) to percentile curves."""
    curves = {}
    for name in labels:
        par = np.stack(par_samples[name])      # (trials, K) or (trials, K, B)
        pinc = np.stack(pinc_samples[name])    # (trials, K)
        obj = np.stack(objectives[name])
        K = pinc.shape[1]
        par_db = np.empty(K)
        pinc_db = np.empty(K)
        for k in range(K):
            par_db[k] = db(EmpiricalDistribution(par[:, k]).percentile(cfg.percentile))
            pinc_db[k] = db(EmpiricalDistribution(pinc[:, k]).percentile(cfg.percentile))
        curves[name] = AlgorithmCurve(par_db, pinc_db, obj.mean(axis=0))
    return curves


def _map_trials(fn, cfg, trials):
    args = [(cfg, t) for t in trials]
    if cfg.workers == 1 or len(args) == 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        # map preserves argument order, so the reduction is deterministic
        return list(pool.map(fn, args))


def gaussian_system(seed, trial, M, N):
    rng = trial_rng(seed, trial, "system")
    A = complex_normal(rng, (M, N))
    y = complex_normal(rng, (M,))
    return LinearSystem(A, y)


def _gaussian_trial(args):
    cfg, trial = args
    sys = gaussian_system(cfg.seed, trial, cfg.M, cfg.N)
    x_ls = solve_ls(sys)
    out = {"par": {}, "pinc": {}, "objective": {}, "residual": 0.0, "stalled": []}
    for spec, name in zip(cfg.algorithms, cfg.labels):
        alg, p, q = parse_algorithm(spec)
        if alg == "linf":
            x, tr = solve_drs_linf(sys, SolverConfig(k_max=cfg.k_max))
        else:
            x, tr = solve_fbs_lplq(sys, SolverConfig(p=p, q=q, tau=cfg.tau, k_max=cfg.k_max,
                                                     stop_objective=cfg.stop_objective))
            if tr.stalled:
                out["stalled"].append(name)
        out["par"][name] = _pad(tr.par, cfg.k_max)
        out["pinc"][name] = _pad(tr.pinc, cfg.k_max)
        out["objective"][name] = _pad(tr.objective, cfg.k_max)
        out["residual"] = max(out["residual"], sys.residual(x))
    c = math.nan
    if cfg.effective_bound_iters > 0:
        x_inf, _ = solve_drs_linf(sys, SolverConfig(k_max=cfg.effective_bound_iters,
                                                    record_trace=False))
        c = tradeoff_constant(sys, x_inf, x_ls)
    out["bound"] = c
    return out


def _pad(a, n):
    """Hold the last value of an early-stopped trace so all traces have ``n`` rows."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] >= n:
        return a[:n]
    return np.concatenate([a, np.repeat(a[-1:], n - a.shape[0], axis=0)])


def run_gaussian_experiment(cfg):
    """Trade-off curves for random Gaussian ``M x N`` systems.

    With one trial the percentile of a single sample is the sample itself,
    so the curve is the raw trajectory of that instance.
    """
    if cfg.kind != "gaussian":
        raise ConfigError("run_gaussian_experiment needs kind='gaussian'")
    results = _map_trials(_gaussian_trial, cfg, range(cfg.trials))
    labels = cfg.labels
    curves = _summarize(
        cfg, labels,
        {n: [r["par"][n] for r in results] for n in labels},
        {n: [r["pinc"][n] for r in results] for n in labels},
        {n: [r["objective"][n] for r in results] for n in labels},
    )
    bounds = [r["bound"] for r in results if not math.isnan(r["bound"])]
    diag = {
        "max_relative_residual": max(r["residual"] for r in results),
        "stalled_probes": sorted({n for r in results for n in r["stalled"]}),
        "bound_trials": len(bounds),
    }
    bound_db = float(db(min(bounds))) if bounds else math.nan
    return TradeoffCurve(cfg.percentile, curves, bound_db, cfg.echo(), diag)


def mimo_scenario(cfg, trial):
    plan = make_tone_plan(cfg.W, cfg.plan_profile)
    chan = gen_channel(cfg.B, cfg.U, cfg.W, cfg.L, trial_rng(cfg.seed, trial, "channel"),
                       unit_tap_variance=cfg.unit_tap_variance)
    S = gen_symbols(cfg.U, plan, trial_rng(cfg.seed, trial, "symbols"))
    return chan, S, plan


def mimo_tradeoff_constant(T_inf, T_ls):
    """``W s^2 / (B ||T_ls||_F^2)`` with ``s`` the summed per-antenna peaks of ``T_inf``.

    For every feasible ``T`` the largest per-antenna PAR times PINC is at
    least this value when ``T_inf`` minimizes the summed peaks.
    """
    W, B = T_inf.shape
    s = _linf_objective(T_inf, "antenna")
    return W * s * s / (B * float(np.vdot(T_ls, T_ls).real))


def _mimo_trial(args):
    cfg, trial = args
    chan, S, plan = mimo_scenario(cfg, trial)
    proj = ToneProjector(chan, plan)
    T_ls = freq_to_time(proj.project(np.zeros((cfg.B, cfg.W), dtype=np.complex128), S))
    ls_energy = grid_energy(T_ls)
    out = {"par": {}, "pinc": {}, "objective": {}, "evm": 0.0, "oob": 0.0, "parseval": 0.0,
           "stalled": []}
    for spec, name in zip(cfg.algorithms, cfg.labels):
        alg, p, q = parse_algorithm(spec)
        jcfg = JppConfig(solver=alg, p=p if alg == "lplq" else 4.0, q=q, tau=cfg.tau,
                         k_max=cfg.k_max)
        res = solve_jpp(S, chan, plan, jcfg, proj)
        tr = res.trace
        if res.extra.get("stalled"):
            out["stalled"].append(name)
        out["par"][name] = tr.par.copy()
        out["pinc"][name] = tr.energy / ls_energy
        out["objective"][name] = tr.objective.copy()
        out["evm"] = max(out["evm"], float(tr.evm.max()))
        out["oob"] = max(out["oob"], float(tr.oob.max()))
        out["parseval"] = max(out["parseval"], float(tr.parseval.max()))
    c = math.nan
    if trial < cfg.bound_trials and cfg.effective_bound_iters > 0:
        res = solve_jpp(S, chan, plan, JppConfig(solver="linf", k_max=cfg.effective_bound_iters,
                                                 record_trace=False), proj)
        c = mimo_tradeoff_constant(res.T, T_ls)
    out["bound"] = c
    return out


def run_mimo_experiment(cfg):
    """Per-antenna PAR / per-trial PINC trade-off curves for JPP.

    PAR samples pool all ``B`` antennas of all trials; PINC samples are one
    per trial. ``diagnostics`` records the worst EVM residual, OOB energy
    and Parseval mismatch seen over all iterates.
    """
    if cfg.kind != "mimo":
        raise ConfigError("run_mimo_experiment needs kind='mimo'")
    results = _map_trials(_mimo_trial, cfg, range(cfg.trials))
    labels = cfg.labels
    curves = _summarize(
        cfg, labels,
        # per-trial (K, B) blocks; _summarize pools trials and antennas per iteration
        {n: [r["par"][n] for r in results] for n in labels},
        {n: [r["pinc"][n] for r in results] for n in labels},
        {n: [r["objective"][n] for r in results] for n in labels},
    )
    bounds = [r["bound"] for r in results if not math.isnan(r["bound"])]
    diag = {
        "max_evm": max(r["evm"] for r in results),
        "max_oob_energy": max(r["oob"] for r in results),
        "max_parseval_mismatch": max(r["parseval"] for r in results),
        "stalled_probes": sorted({n for r in results for n in r["stalled"]}),
        "bound_trials": len(bounds),
        "par_samples_per_iteration": cfg.trials * cfg.B,
        "pinc_samples_per_iteration": cfg.trials,
    }
    bound_db = float(db(min(bounds))) if bounds else math.nan
    return TradeoffCurve(cfg.percentile, curves, bound_db, cfg.echo(), diag)


def run_experiment(cfg):
    if cfg.kind == "gaussian":
        return run_gaussian_experiment(cfg)
    return run_mimo_experiment(cfg)


def _pct_tag(pct):
    return f"{pct:g}".replace(".", "_")


def csv_header(pct):
    tag = _pct_tag(pct)
    return ["algorithm", "iteration", f"par_db_p{tag}", f"pinc_db_p{tag}", "objective_mean",
            "bound_db"]


def emit_results(curve, path, format="csv"):
    """Write ``curve`` to ``path`` as CSV or JSON, overwriting any existing file."""
    if not curve.curves:
        raise ConfigError("nothing to write: the curve has no algorithms")
    if format not in ("csv", "json"):
        raise ConfigError(f"unknown output format {format!r}")
    try:
        with open(path, "w", newline="") as fh:
            if format == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(csv_header(curve.percentile))
                for name, k, par, pinc, obj, bound in curve.rows():
                    w.writerow([name, k] + [f"{v:.6f}" for v in (par, pinc, obj, bound)])
            else:
                json.dump(_to_json(curve), fh, indent=1, allow_nan=False)
                fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results: {exc.strerror}", str(path)) from None


def _to_json(curve):
    keys = csv_header(curve.percentile)
    # NaN (no bound computed) is stored as null to keep the file strict JSON
    rows = [dict(zip(keys, (None if isinstance(v, float) and math.isnan(v) else v for v in r)))
            for r in curve.rows()]
    return {
        "version": curve.version,
        "percentile": curve.percentile,
        "percentile_rule": "nearest-rank",
        "config": curve.config,
        "diagnostics": curve.diagnostics,
        "columns": keys,
        "rows": rows,
    }


def read_results(path):
    """Load a JSON results file back into a :class:`TradeoffCurve`."""
    with open(path) as fh:
        doc = json.load(fh)
    keys = doc["columns"]
    pct = doc["percentile"]
    grouped = {}
    bound = math.nan
    for row in doc["rows"]:
        grouped.setdefault(row[keys[0]], []).append(row)
        bound = math.nan if row["bound_db"] is None else row["bound_db"]
    curves = {}
    for name, rows in grouped.items():
        rows.sort(key=lambda r: r["iteration"])
        curves[name] = AlgorithmCurve(
            np.array([r[keys[2]] for r in rows], dtype=float),
            np.array([r[keys[3]] for r in rows], dtype=float),
            np.array([math.nan if r["objective_mean"] is None else r["objective_mean"]
                      for r in rows], dtype=float),
        )
    return TradeoffCurve(pct, curves, float(bound), doc["config"], doc["diagnostics"],
                         doc["version"])
