import numpy as np
import pytest
from scipy import linalg

from parqo.errors import ConfigError
from parqo.harness import mimo_tradeoff_constant
from parqo.jpp import (JppConfig, default_gamma, evaluate_jpp, jpp_gradient, jpp_objective,
                       jpp_project, solve_jpp)
from parqo.metrics import objective_f
from parqo.ofdm import (ToneProjector, channel_from_taps, freq_to_time, gen_channel,
                        gen_symbols, ls_precode, make_tone_plan, time_to_freq)
from parqo.solvers import grad_lplq
from parqo.streams import complex_normal

from conftest import fd_grad


@pytest.fixture
def small(rng):
    plan = make_tone_plan(64, "custom", range(18, 48))  # 30 used tones
    chan = gen_channel(8, 2, 64, 4, rng)
    S = gen_symbols(2, plan, rng)
    return S, chan, plan


def test_config_validation():
    for kw in (dict(solver="l2"), dict(p=2, q=2), dict(k_max=0), dict(tau=0), dict(gamma=-1),
               dict(linf_scope="tone"), dict(feas_tol=0)):
        with pytest.raises(ConfigError):
            JppConfig(**kw)
    assert JppConfig().label == "lplq:4:2"
    assert JppConfig(solver="linf").label == "linf"


def test_project_examples(small, rng):
    S, chan, plan = small
    X_ls = ls_precode(S, chan, plan)
    assert np.array_equal(jpp_project(np.zeros((8, 64), complex), S, chan, plan), X_ls)
    # feasible input is a fixed point
    assert np.allclose(jpp_project(X_ls, S, chan, plan), X_ls, atol=1e-13)
    # nullspace perturbation plus a constraint-violating part: only the latter is removed
    X_feas = X_ls.copy()
    X_bad = X_ls.copy()
    for w in plan.used_index:
        H = chan.freq[w]
        N = linalg.null_space(H)
        X_feas[:, w] += N @ complex_normal(rng, (N.shape[1],))
        X_bad[:, w] = X_feas[:, w] + H.conj().T @ complex_normal(rng, (2,))
    X_bad[:, plan.unused_index] = complex_normal(rng, (8, plan.unused_index.size))
    out = jpp_project(X_bad, S, chan, plan)
    assert np.max(np.abs(out - X_feas)) < 1e-10
    assert np.all(out[:, plan.unused_index] == 0)


def test_gradient_examples(rng):
    W = 32
    T = np.exp(2j * np.pi * np.outer(np.arange(W), [1, 3, 7]) / W) * [1, 2, 0.5]
    assert np.linalg.norm(jpp_gradient(T, 4, 2)) < 1e-12
    T = np.zeros((W, 3), complex)
    T[:, 1] = complex_normal(rng, (W,))
    G = jpp_gradient(T, 4, 2)
    assert not np.any(G[:, [0, 2]])
    T = complex_normal(rng, (W, 3))
    for p, q in ((4, 2), (2, 1)):
        G = jpp_gradient(T, p, q)
        fd = fd_grad(lambda M: sum(objective_f(M[:, b], p, q) for b in range(3)), T)
        assert np.linalg.norm(G - fd) / np.linalg.norm(G) < 1e-6
        for b in range(3):
            assert np.allclose(G[:, b], grad_lplq(T[:, b], p, q), rtol=0, atol=1e-15)
    with pytest.raises(ConfigError):
        jpp_gradient(T, 2, 2)


def test_square_channel_has_no_freedom(rng):
    taps = complex_normal(rng, (2, 3, 3)) / np.sqrt(2)
    chan = channel_from_taps(taps, 16)
    plan = make_tone_plan(16, "custom", range(1, 17))
    S = gen_symbols(3, plan, rng)
    res = solve_jpp(S, chan, plan, JppConfig(k_max=6))
    assert np.allclose(res.trace.par, res.trace.par[0], rtol=1e-10)
    res = solve_jpp(S, chan, plan, JppConfig(solver="linf", k_max=6))
    assert np.allclose(res.trace.par, res.trace.par[0], rtol=1e-10)


@pytest.mark.parametrize("cfg", [JppConfig(k_max=40), JppConfig(p=2, q=1, k_max=40),
                                 JppConfig(solver="linf", k_max=40),
                                 JppConfig(solver="linf", linf_scope="grid", k_max=40)])
def test_solve_contract(small, cfg):
    S, chan, plan = small
    proj = ToneProjector(chan, plan)
    X_ls = ls_precode(S, chan, plan, proj)
    T_ls = freq_to_time(X_ls)
    res = solve_jpp(S, chan, plan, cfg, proj)
    tr = res.trace
    assert len(tr) == 40
    assert np.max(np.abs(time_to_freq(res.T) - res.X)) < 1e-12
    assert tr.evm.max() < 1e-10
    assert np.all(tr.oob == 0.0)
    assert tr.parseval.max() < 1e-12
    ls_par = 64 * np.max(np.abs(T_ls) ** 2, axis=0) / np.sum(np.abs(T_ls) ** 2, axis=0)
    assert np.allclose(tr.par[0], ls_par, rtol=1e-14)
    if cfg.solver == "lplq":
        assert np.all(np.diff(tr.objective) <= 1e-12 * tr.objective[0])
    recs = evaluate_jpp(res, S, chan, plan, T_ls, proj)
    assert len(recs) == 40 and recs[0].iteration == 1
    assert recs[0].pinc == 1.0
    assert all(r.oob_energy == 0.0 and r.evm < 1e-10 for r in recs)
    assert recs[-1].pinc == pytest.approx(np.linalg.norm(res.T) ** 2 / np.linalg.norm(T_ls) ** 2)


def test_first_iterate_is_ls(small):
    S, chan, plan = small
    res = solve_jpp(S, chan, plan, JppConfig(k_max=1))
    assert np.array_equal(res.X, ls_precode(S, chan, plan))


def test_small_instance_beats_ls_and_respects_bound(small):
    S, chan, plan = small
    proj = ToneProjector(chan, plan)
    T_ls = freq_to_time(ls_precode(S, chan, plan, proj))
    res = solve_jpp(S, chan, plan, JppConfig(k_max=200), proj)
    tr = res.trace
    assert tr.par[-1].max() < tr.par[0].max()
    ref = solve_jpp(S, chan, plan, JppConfig(solver="linf", k_max=5000, record_trace=False), proj)
    c = mimo_tradeoff_constant(ref.T, T_ls)
    pinc = tr.energy / tr.energy[0]
    assert np.all(tr.par.max(axis=1) * pinc >= c * (1 - 1e-3))
    # whole-grid version of the same bound with the grid-scope baseline
    ref_g = solve_jpp(S, chan, plan, JppConfig(solver="linf", linf_scope="grid", k_max=5000,
                                               record_trace=False), proj)
    c_grid = 64 * 8 * np.abs(ref_g.T).max() ** 2 / np.linalg.norm(T_ls) ** 2
    for T in (T_ls, res.T):
        grid_par = T.size * np.abs(T).max() ** 2 / np.linalg.norm(T) ** 2
        assert grid_par * np.linalg.norm(T) ** 2 / np.linalg.norm(T_ls) ** 2 >= c_grid * (1 - 1e-3)


def test_probe_and_fixed_step(small):
    S, chan, plan = small
    res = solve_jpp(S, chan, plan, JppConfig(k_max=3))
    assert res.extra["stalled"] is False
    assert res.tau in [2.0**-k for k in range(41)]
    fixed = solve_jpp(S, chan, plan, JppConfig(k_max=3, tau=res.tau))
    assert np.array_equal(fixed.T, res.T)


def test_probe_fails_gracefully_on_min_par_grid():
    # one used tone, one antenna worth of freedom removed: LS output is a pure tone
    taps = np.array([[[1.0, 0.0]]])
    chan = channel_from_taps(taps, 8)
    plan = make_tone_plan(8, "custom", {3})
    S = np.zeros((1, 8), complex)
    S[0, 2] = 1
    res = solve_jpp(S, chan, plan, JppConfig(k_max=3))
    assert res.extra["stalled"] is True


def test_default_gamma(small):
    S, chan, plan = small
    m = 2 * 30 + 8 * 34
    assert default_gamma(S, plan, 8) == pytest.approx(np.linalg.norm(S) / np.sqrt(m))
    res = solve_jpp(S, chan, plan, JppConfig(solver="linf", k_max=2))
    assert res.tau == pytest.approx(default_gamma(S, plan, 8))


def test_no_trace(small):
    S, chan, plan = small
    res = solve_jpp(S, chan, plan, JppConfig(k_max=5, record_trace=False))
    assert res.trace is None
    with pytest.raises(ConfigError):
        evaluate_jpp(res, S, chan, plan, res.T)


def test_objective_helper(rng):
    T = complex_normal(rng, (16, 3))
    assert jpp_objective(T, 4, 2) == pytest.approx(sum(objective_f(T[:, b], 4, 2) for b in range(3)))
