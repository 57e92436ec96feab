"""Quick invariant checks run by ``parqo selftest``.

Each check is a small randomized instance of a property the library
guarantees. The full versions live in the test suite.
"""
import math
import time

import numpy as np

from . import kernels
from .jpp import JppConfig, jpp_gradient, solve_jpp
from .metrics import is_min_par, objective_f, par, par_pq
from .ofdm import (ToneProjector, freq_to_time, gen_channel, gen_symbols, ls_precode,
                   make_tone_plan, oob_energy, time_to_freq)
from .solvers import (LinearSystem, SolverConfig, grad_lplq, project_l1_ball, prox_linf,
                      solve_drs_linf, solve_fbs_lplq, solve_ls)
from .streams import complex_normal, make_rng

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _fd_grad(x, p, q, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        dre = (objective_f(x + e, p, q) - objective_f(x - e, p, q)) / (2 * h)
        dim = (objective_f(x + 1j * e, p, q) - objective_f(x - 1j * e, p, q)) / (2 * h)
        g[i] = 0.5 * (dre + 1j * dim)
    return g


@check
def gradient_matches_finite_differences(rng):
    worst = 0.0
    for p, q in ((4, 2), (3, 2), (2, 1)):
        for _ in range(3):
            x = complex_normal(rng, (int(rng.integers(10, 30)),))
            g = grad_lplq(x, p, q)
            worst = max(worst, np.linalg.norm(g - _fd_grad(x, p, q)) / np.linalg.norm(g))
    return worst < 1e-6, f"max relative error {worst:.2e}"


@check
def ls_matches_pseudo_inverse(rng):
    worst = 0.0
    for m, n in ((3, 7), (20, 40), (50, 100)):
        A, y = complex_normal(rng, (m, n)), complex_normal(rng, (m,))
        x = solve_ls(LinearSystem(A, y))
        ref = np.linalg.pinv(A) @ y
        worst = max(worst, np.linalg.norm(x - ref) / np.linalg.norm(ref))
    return worst < 1e-10, f"max relative error {worst:.2e}"


@check
def norm_equivalence_and_surrogate_bound(rng):
    bad = 0
    for _ in range(500):
        x = complex_normal(rng, (int(rng.integers(2, 64)),))
        r = par(x)
        for p, q in ((4, 2), (3, 2), (2, 1)):
            bad += objective_f(x, p, q) < -1e-9 * np.vdot(x, x).real
            bad += par_pq(x, p, q) > r + 1e-9
        bad += not 1 - 1e-12 <= r <= x.size * (1 + 1e-12)
    return bad == 0, f"{bad} violations"


@check
def min_par_vectors_are_stationary(rng):
    x = np.exp(2j * np.pi * rng.random(50))
    worst = max(np.linalg.norm(grad_lplq(x, p, q)) for p, q in ((4, 2), (3, 2), (2, 1)))
    ok = is_min_par(x, 1e-12) and worst < 1e-12 * np.linalg.norm(x)
    return ok, f"largest gradient norm {worst:.1e}"


@check
def moreau_identity(rng):
    z = complex_normal(rng, (40,))
    tau = float(rng.uniform(0.1, 3.0))
    err = np.linalg.norm(prox_linf(z, tau) + project_l1_ball(z, tau) - z)
    inside = np.abs(project_l1_ball(z, tau)).sum() <= tau * (1 + 1e-12)
    return err < 1e-12 and inside, f"identity error {err:.1e}"


@check
def fbs_is_feasible_and_monotone(rng):
    sys = LinearSystem(complex_normal(rng, (20, 40)), complex_normal(rng, (20,)))
    x, tr = solve_fbs_lplq(sys, SolverConfig(k_max=200))
    mono = bool(np.all(np.diff(tr.objective) <= 1e-12 * tr.objective[0]))
    return mono and sys.residual(x) < 1e-9, f"final PAR {10 * math.log10(tr.par[-1]):.2f} dB"


@check
def drs_peak_bound(rng):
    m, n = 5, 10
    sys = LinearSystem(complex_normal(rng, (m, n)), complex_normal(rng, (m,)))
    x, _ = solve_drs_linf(sys, SolverConfig(k_max=3000, record_trace=False))
    r = par(x)
    return r <= n / (n - m + 1) * (1 + 1e-3), f"PAR {r:.4f} vs bound {n / (n - m + 1):.4f}"


@check
def ofdm_transforms_and_ls_precoder(rng):
    plan = make_tone_plan(64, "custom", range(4, 34))
    chan = gen_channel(8, 2, 64, 4, rng)
    S = gen_symbols(2, plan, rng)
    proj = ToneProjector(chan, plan)
    X = ls_precode(S, chan, plan, proj)
    T = freq_to_time(X)
    parseval = abs(np.linalg.norm(T) - np.linalg.norm(X)) / np.linalg.norm(X)
    round_trip = np.max(np.abs(time_to_freq(T) - X))
    ok = parseval < 1e-12 and round_trip < 1e-12 and proj.evm(X, S) < 1e-10
    ok = ok and oob_energy(X, plan) == 0.0
    return ok, f"Parseval {parseval:.1e}, EVM {proj.evm(X, S):.1e}"


@check
def jpp_keeps_constraints(rng):
    plan = make_tone_plan(64, "custom", range(4, 34))
    chan = gen_channel(8, 2, 64, 4, rng)
    S = gen_symbols(2, plan, rng)
    worst_evm, worst_oob = 0.0, 0.0
    for cfg in (JppConfig(k_max=30), JppConfig(solver="linf", k_max=30)):
        tr = solve_jpp(S, chan, plan, cfg).trace
        worst_evm = max(worst_evm, tr.evm.max())
        worst_oob = max(worst_oob, tr.oob.max())
    T = complex_normal(rng, (64, 3))
    sep = np.linalg.norm(jpp_gradient(T, 4, 2)[:, 1] - grad_lplq(T[:, 1], 4, 2))
    ok = worst_evm < 1e-10 and worst_oob == 0.0 and sep < 1e-14
    return ok, f"EVM {worst_evm:.1e}, OOB {worst_oob}"


@check
def kernel_backends_agree(rng):
    names = kernels.available()
    if len(names) < 2:
        return True, "only the NumPy backend is available"
    sys = LinearSystem(complex_normal(rng, (10, 30)), complex_normal(rng, (10,)))
    outs = []
    active = kernels.BACKEND
    try:
        for name in names:
            kernels.use(name)
            x, _ = solve_fbs_lplq(sys, SolverConfig(tau=0.25, k_max=50))
            outs.append(x)
    finally:
        kernels.use(active)
    err = np.linalg.norm(outs[0] - outs[1]) / np.linalg.norm(outs[1])
    return err < 1e-10, f"{names[0]} vs {names[1]}: {err:.1e}"


def run(seed=0, out=print):
    """Run every check; returns the number of failures."""
    failures = 0
    out(f"kernel backend: {kernels.BACKEND}")
    for fn in CHECKS:
        rng = make_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        failures += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {fn.__name__:<42} {detail} ({dt:.2f} s)")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
