"""Acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary. The
three Monte-Carlo sweeps (200 paired trials each) are computed once per session
and shared by the trend criteria; they use every available core.
"""
import io
import os

import numpy as np
import pytest

from irs_ee.active_beamforming import mmse_receiver
from irs_ee.bcd import OptimizerMode, optimize
from irs_ee.channel_gen import trial_rng
from irs_ee.core_model import SystemConfig, compute_sinr, effective_channels
from irs_ee.experiments import DEFAULT_SWEEPS, ExperimentSpec, emit_csv, run_experiment
from irs_ee.exceptions import Infeasible
from irs_ee.passive_beamforming import (
    PhaseSettings,
    dc_sdp_iterate,
    eval_f3_f4,
    gaussian_randomization,
    partials_f4,
    sum_rate_of_phases,
)
from irs_ee.power_control import (
    dinkelbach_solve,
    energy_ratio,
    eval_f1_f2,
    grad_f2,
    qos_feasible_init,
)

from conftest import ACCEPTANCE_LINES, crandn, scenario
from test_active_beamforming import _instance, _probe_sinr
from test_passive_beamforming import _random_unit_diag_psd, grid_best, lifted_instance
from test_power_control import _grid_best, gain_instance, golden_max

TRIALS = 200
WORKERS = os.cpu_count() or 1


def report(number, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def monotone(trace, rtol=1e-9):
    t = np.asarray(trace)
    return bool(np.all(t[1:] >= t[:-1] - rtol * np.abs(t[:-1])))


@pytest.fixture(scope="session")
def sweeps():
    out = {}
    for var in ("pmax", "n", "m"):
        spec = ExperimentSpec(sweep_var=var, sweep_values=DEFAULT_SWEEPS[var], trials=TRIALS,
                              workers=WORKERS)
        out[var] = run_experiment(spec)
    return out


def mode_index(table, mode):
    return table.modes.index(OptimizerMode(mode))


def paired_stats(a, b):
    """Mean and standard error of ``a - b`` over trials where both are feasible."""
    ok = np.isfinite(a) & np.isfinite(b)
    d = a[ok] - b[ok]
    return d.mean(), d.std(ddof=1) / np.sqrt(d.size)


def test_criterion_01_monotone_bcd():
    bad = []
    for seed in range(100):
        config, channels, _ = scenario(seed)
        for mode in OptimizerMode:
            out = optimize(config, channels, mode, rng=trial_rng(seed, 0))
            if not monotone(out.trace):
                bad.append((seed, mode.value))
    report(1, not bad, f"non-monotone traces on 100 seeds x 5 modes: {bad[:5]}")


def test_criterion_02_dinkelbach():
    failures, count = [], 0
    for seed in range(1000):
        if count == 200:
            break
        config, g = gain_instance(seed)
        try:
            P0 = qos_feasible_init(g, config)
        except Infeasible:
            continue
        count += 1
        res = dinkelbach_solve(g, config, P0)
        lam = np.array(res.lambdas)
        scale = 1.0 + (lam[-2] if lam.size > 1 else 0.0) * config.circuit_power
        if not (np.all(np.diff(lam) >= -1e-9 * np.abs(lam[:-1]))
                and abs(res.epsilons[-1]) <= 1e-6 * scale):
            failures.append(seed)
    cfg = SystemConfig(1, 1, 1, max_power=[0.1], min_sinr=[0.0])
    rel = []
    for g in 10.0 ** np.arange(4, 13):
        res = dinkelbach_solve([[g]], cfg, [0.1])
        best = golden_max(lambda p: np.log2(1 + g * p) / (0.35 * p + 0.05), 0.0, 0.1)
        rel.append(abs(res.lam - best) / best)
    ok = count == 200 and not failures and max(rel) <= 1e-4
    report(2, ok, f"{count} instances, failures {failures[:5]}, "
                  f"K=1 max rel err vs golden section {max(rel):.2e}")


def test_criterion_03_dc_power_vs_grid():
    worst, used = 0.0, 0
    for seed in range(50):
        config, g = gain_instance(seed, K=2)
        try:
            P0 = qos_feasible_init(g, config)
        except Infeasible:
            continue
        used += 1
        ee = energy_ratio(dinkelbach_solve(g, config, P0).power, g, config)
        best = _grid_best(g, config)
        worst = max(worst, (best - ee) / best)
    report(3, used > 0 and worst <= 1e-3,
           f"{used} seeds, worst shortfall vs 200x200 grid {worst:.2e} (tol 1e-3)")


def test_criterion_04_gradients():
    rng = np.random.default_rng(404)
    worst_f2 = 0.0
    for _ in range(100):
        K = 3
        config = SystemConfig.uniform(K)
        g = 10 ** rng.uniform(0, 4, (K, K))
        P = rng.uniform(0.001, 0.1, K)
        grad = grad_f2(P, g)
        for i in range(K):
            e = np.zeros(K)
            e[i] = 1e-6 * P[i]
            fd = (eval_f1_f2(P + e, g, 0, config)[1] - eval_f1_f2(P - e, g, 0, config)[1]) \
                / (2 * e[i])
            worst_f2 = max(worst_f2, abs(grad[i] - fd) / max(abs(fd), 1e-12))
    worst_f4 = 0.0
    for seed in range(100):
        *_, lifted = lifted_instance(seed)
        W = _random_unit_diag_psd(rng, 4)
        d_re, d_im = partials_f4(W, lifted)
        for n, j in zip(*np.tril_indices(4, -1)):
            for unit, expected in ((1.0, d_re[n, j]), (1j, d_im[n, j])):
                E = np.zeros((4, 4), dtype=complex)
                E[n, j] = unit * 1e-6
                E[j, n] = np.conj(unit) * 1e-6
                fd = (eval_f3_f4(W + E, lifted)[1] - eval_f3_f4(W - E, lifted)[1]) / 2e-6
                # absolute floor for partials that vanish to roundoff
                worst_f4 = max(worst_f4, abs(expected - fd) / max(abs(fd), 1e-4))
    report(4, worst_f2 < 1e-5 and worst_f4 < 1e-5,
           f"max rel err grad_f2 {worst_f2:.2e}, partials_f4 {worst_f4:.2e} (tol 1e-5)")


def test_criterion_05_mmse_optimality():
    rng = np.random.default_rng(505)
    beaten = 0
    for seed in range(100):
        config, channels, w, P = _instance(seed)
        V = mmse_receiver(config, channels, w, P)
        best = compute_sinr(config, channels, w, P, V)
        hbar = effective_channels(channels, w)
        U = crandn(rng, 1000, config.num_bs_antennas)
        for k in range(config.num_users):
            beaten += int(np.any(_probe_sinr(config, hbar, P, U, k) > best[k] * (1 + 1e-9)))
    report(5, beaten == 0, f"instance-users beaten by one of 1000 probes: {beaten} of 300")


def test_criterion_06_phase_sdr_quality():
    tight = PhaseSettings(dc_rtol=1e-12, dc_max_iter=300, sdp_tol=1e-12)
    rand_ok = sdp_ok = n = 0
    empty = []
    for seed in range(100):
        *_, w, rng, lifted = lifted_instance(seed, N=2)
        best = grid_best(lifted)
        if not np.isfinite(best):
            # no QoS-feasible unit-modulus point exists on the grid
            empty.append(seed)
            continue
        n += 1
        relaxed = dc_sdp_iterate(lifted, np.eye(2, dtype=complex), np.zeros(2, complex), tight)
        sdp_ok += relaxed.values[-1] >= best - 1e-9
        it = dc_sdp_iterate(lifted, np.outer(w, w.conj()), w)
        out = gaussian_randomization(lifted, it, 50, rng)
        rand_ok += sum_rate_of_phases(lifted, out) >= 0.98 * best
    ok = rand_ok >= 0.9 * n and sdp_ok == n
    report(6, ok, f"{n} seeds with a feasible grid point (skipped {empty}): randomized >= 98% "
                  f"of grid on {rand_ok}, relaxed >= grid on {sdp_ok}")


def test_criterion_07_pmax_trend(sweeps):
    table = sweeps["pmax"]
    values = list(table.sweep_values)
    prop = table.ee[:, mode_index(table, "proposed")]
    means = np.nanmean(prop, axis=1)
    drops = []
    for i in range(len(values) - 1):
        d, se = paired_stats(prop[i + 1], prop[i])
        if d < 0:
            drops.append((values[i + 1], d, se))
    i20, i30 = values.index(20.0), values.index(30.0)
    saturates = means[i30] <= 1.05 * means[i20]
    tails = {}
    for mode in ("fix_pa", "fix_all"):
        m = np.nanmean(table.ee[:, mode_index(table, mode)], axis=1)
        peak = int(np.argmax(m))
        tails[mode] = (values[peak], bool(np.all(np.diff(m[peak:]) <= 0)))
    ok = not drops and saturates and all(t[1] for t in tails.values())
    report(7, ok, f"proposed means {np.round(means / 1e6, 3).tolist()} Mbit/J, "
                  f"decreasing steps {drops}, EE30/EE20={means[i30] / means[i20]:.4f}, "
                  f"(peak dBm, non-increasing after peak) {tails}")


def test_criterion_08_baseline_ordering(sweeps):
    violations = []
    for var, table in sweeps.items():
        means = np.nanmean(table.ee, axis=2)
        ip = mode_index(table, "proposed")
        for i, v in enumerate(table.sweep_values):
            for j, mode in enumerate(table.modes):
                if j != ip and not means[i, ip] >= means[i, j]:
                    violations.append((var, v, mode.value, means[i, ip], means[i, j]))
    report(8, not violations, f"{TRIALS} paired trials, points where a baseline wins: "
                              f"{violations}")


def test_criterion_09_n_and_m_trends(sweeps):
    detail, ok = [], True
    gains = {}
    for var in ("n", "m"):
        table = sweeps[var]
        prop = table.ee[:, mode_index(table, "proposed")]
        steps = []
        for i in range(len(table.sweep_values) - 1):
            d, se = paired_stats(prop[i + 1], prop[i])
            steps.append(round(float(d / se), 1))
            ok &= d > 2 * se
        detail.append(f"{var} step z-scores {steps}")
        values = list(table.sweep_values)
        gains[var] = prop[values.index(8)] - prop[values.index(4)]
    d, se = paired_stats(gains["n"], gains["m"])
    ok &= d > 0
    detail.append(f"gain N4->8 minus gain M4->8 = {d / 1e6:.3f} +- {se / 1e6:.3f} Mbit/J")
    report(9, ok, "; ".join(detail))


def test_criterion_10_determinism():
    spec = ExperimentSpec(sweep_var="pmax", sweep_values=(10.0, 20.0, 30.0), trials=4, seed=17)
    texts = []
    for workers in (1, 1, min(2, WORKERS) if WORKERS > 1 else 1):
        buf = io.StringIO()
        emit_csv(run_experiment(ExperimentSpec(**{**spec.__dict__, "workers": workers})), buf)
        texts.append(buf.getvalue())
    report(10, len(set(texts)) == 1, f"{len(texts)} reruns, distinct CSV outputs: "
                                     f"{len(set(texts))}")
