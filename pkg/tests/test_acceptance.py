"""Acceptance suite: one test per criterion, summarized at the end of the run."""

import json
import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from tempered_fpe.cli import Problem, main, recipe_text
from tempered_fpe.config import parse_config_text
from tempered_fpe.levy import TemperedStableParams, large_jump_rate, second_moment_rate
from tempered_fpe.montecarlo import JumpSampler, block_rng, empirical_density, l1_distance, simulate_paths
from tempered_fpe.solver import (
    DriftSpec,
    Grid1D,
    SolverConfig,
    build_operator,
    gaussian_initial,
    max_stable_dt,
    rhs_unbounded,
    solve,
    total_mass,
)
from tempered_fpe.special import riemann_zeta, tempered_tail_weight, upper_incomplete_gamma
from tempered_fpe.zakai import ObservationModel, run_filter, simulate_signal_observation


def _recipe(name, **overrides):
    cfg = parse_config_text(recipe_text(name))
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _trapezoid(x, y):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


@pytest.mark.criterion(1, "discrete maximum principle")
def test_c01_maximum_principle(criterion):
    start = time.perf_counter()
    violations = 0
    rng = np.random.default_rng(101)
    g = Grid1D.bounded(64)
    for alpha in (0.5, 1.5):
        for lam in (0.01, 1.0):
            params = TemperedStableParams.with_default_normalization(alpha, lam)
            A = build_operator(params, g, DriftSpec.zero()).matrix
            dt = max_stable_dt(params, g.h)
            U = rng.random((A.shape[0], 100)) * rng.uniform(0.1, 10.0, 100)
            U[:, :10] = 0.0
            U[rng.integers(0, A.shape[0], 10), np.arange(10)] = 5.0  # isolated spikes
            peak = U.max(axis=0)
            for _ in range(200):
                U = U + dt * (A @ U)
                new_peak = U.max(axis=0)
                violations += int(np.count_nonzero(U < 0.0))
                violations += int(np.count_nonzero(new_peak > peak))
                peak = new_peak
    elapsed = time.perf_counter() - start
    criterion.note(f"violations={violations}, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 30.0


@pytest.mark.criterion(2, "constant-field annihilation")
def test_c02_constant_annihilation(criterion):
    worst = 0.0
    for alpha, lam in ((0.5, 0.01), (1.5, 0.01), (1.5, 1.0), (0.2, 0.1)):
        params = TemperedStableParams.with_default_normalization(alpha, lam)
        g = Grid1D.truncated(8.0, 200)
        c = 2.5
        out = rhs_unbounded(SolverConfig(params, g, DriftSpec.zero(), 1e-4, 1.0), np.full(g.n_nodes, c))
        # The constant continues past the grid: restore the one ghost neighbour
        # that the second difference reaches at j = +-J.
        ghost = build_operator(params, g, DriftSpec.zero()).diffusion_coefficient / g.h**2 * c
        out[0] += ghost
        out[-1] += ghost
        worst = max(worst, float(np.max(np.abs(out))))
    criterion.note(f"max |rhs| = {worst:.2e}")
    assert worst <= 1e-13


@pytest.mark.criterion(3, "spatial self-convergence, order >= 1.7")
def test_c03_spatial_convergence(criterion):
    params = TemperedStableParams.with_default_normalization(1.5, 0.01)
    L, t, dt = 8.0, 0.5, 1e-5

    def run(J):
        g = Grid1D.truncated(L, J)
        return g, solve(SolverConfig(params, g, DriftSpec.zero(), dt, t), gaussian_initial(g))[-1].values

    g_ref, ref = run(800)
    hs, errs, errs_full = [], [], []
    for J in (100, 200, 400):
        g, v = run(J)
        r = ref[:: 800 // J]
        window = np.abs(g.nodes) <= L / 2
        hs.append(g.h)
        errs.append(g.h * float(np.sum(np.abs(v - r)[window])))
        errs_full.append(l1_distance(g, v, r))
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    order_full = np.polyfit(np.log(hs), np.log(errs_full), 1)[0]
    criterion.note(
        f"order {order:.2f} on |x|<=L/2, {order_full:.2f} on the whole grid; errors "
        + ", ".join(f"{e:.2e}" for e in errs)
    )
    assert order >= 1.7


@pytest.mark.criterion(4, "truncation decay in L")
def test_c04_truncation_decay(criterion):
    params = TemperedStableParams.with_default_normalization(0.5, 0.01)
    h, t, dt, window = 0.05, 0.5, 1e-3, 2.0

    def run(L):
        g = Grid1D.truncated(L, int(round(L / h)))
        v = solve(SolverConfig(params, g, DriftSpec.zero(), dt, t), gaussian_initial(g))[-1].values
        return g, v

    g_ref, ref = run(32.0)
    errs = []
    for L in (4.0, 8.0, 16.0):
        g, v = run(L)
        sel_ref = np.abs(g_ref.nodes) <= window + 1e-12
        sel = np.abs(g.nodes) <= window + 1e-12
        errs.append(h * float(np.sum(np.abs(v[sel] - ref[sel_ref]))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    lo, hi = 2**0.5 / 2, 2 * 2**0.5
    criterion.note("errors " + ", ".join(f"{e:.3g}" for e in errs) + "; ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert all(lo <= r <= hi for r in ratios)


@pytest.fixture(scope="module")
def verfymc_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verfymc_a")
    start = time.perf_counter()
    code = main(["recipe", "verfymc", "--out", str(out)])
    return code, out, time.perf_counter() - start


@pytest.mark.criterion(5, "Monte Carlo vs finite differences, L1 <= 0.05")
def test_c05_monte_carlo_vs_fd(criterion, verfymc_run):
    code, out, elapsed = verfymc_run
    assert code == 0
    snap = json.loads((out / "meta.json").read_text())["results"]["snapshots"][-1]
    dist = snap["l1_distance"]

    # Same comparison without absorption on the truncated line [-8, 8], for reference.
    cfg = _recipe("verfymc", domain=None, half_width=8.0)
    prob = Problem(cfg, 0.5, 0.01)
    fd = prob.physical_values(solve(prob.solver, prob.initial)[-1])
    ens = simulate_paths(prob.mc_config(cfg, cfg.t_final))
    mc, escaped = empirical_density(ens.positions, prob.physical_grid, ens.n_paths)
    literal = l1_distance(prob.physical_grid, fd, mc)
    criterion.note(
        f"L1={dist:.4f} absorbing on (-8,8), {elapsed:.1f} s; truncated line: L1={literal:.3f} "
        f"with {escaped:.1%} of paths beyond |x|=8"
    )
    assert dist <= 0.05
    assert elapsed < 120.0


@pytest.mark.criterion(6, "bimodality under the double-well drift")
def test_c06_bimodality(criterion):
    cfg = _recipe("difft")
    prob = Problem(cfg, 1.5, 0.01)
    snaps = solve(prob.solver, prob.initial, [0.4, 0.8, 1.6])
    x = prob.x
    outside = []
    for s in snaps:
        v = prob.physical_values(s)
        inner = np.abs(x) <= 0.5 + 1e-12
        outside.append(prob.mass(s) - _trapezoid(x[inner], v[inner]))
    v = prob.physical_values(snaps[-1])
    peaks = [i for i in range(1, v.size - 1) if v[i - 1] < v[i] >= v[i + 1]]
    where = sorted(float(x[i]) for i in peaks)
    criterion.note(f"maxima at {', '.join(f'{p:.3f}' for p in where)}; outside mass " + ", ".join(f"{m:.3f}" for m in outside))
    assert len(peaks) == 2
    assert abs(where[0] + 1.0) <= 0.2 and abs(where[1] - 1.0) <= 0.2
    assert outside[0] < outside[1] < outside[2]


@pytest.mark.criterion(7, "peak flattens as alpha grows")
def test_c07_alpha_flattening(criterion):
    cfg = _recipe("difalp")
    peaks = []
    for alpha in cfg.alpha:
        prob = Problem(cfg, alpha, cfg.lam[0])
        peaks.append(float(prob.physical_values(solve(prob.solver, prob.initial)[-1]).max()))
    criterion.note(", ".join(f"a={a:g}: {p:.4f}" for a, p in zip(cfg.alpha, peaks)))
    assert cfg.alpha == [0.2, 0.6, 1.2, 1.6]
    assert all(a > b for a, b in zip(peaks, peaks[1:]))


@pytest.mark.criterion(8, "density at 0 grows with lambda")
def test_c08_lambda_concentration(criterion):
    cfg = _recipe("diflam")
    centre = []
    for lam in cfg.lam:
        prob = Problem(cfg, cfg.alpha[0], lam)
        v = prob.physical_values(solve(prob.solver, prob.initial)[-1])
        centre.append(float(v[np.argmin(np.abs(prob.x))]))
    criterion.note(", ".join(f"l={l:g}: {p:.4f}" for l, p in zip(cfg.lam, centre)))
    assert cfg.lam == [0.01, 0.05, 0.1]
    assert all(a < b for a, b in zip(centre, centre[1:]))


@pytest.mark.criterion(9, "Zakai filter: reduction and normalization")
def test_c09_zakai(criterion):
    cfg = _recipe("zakai")
    prob = Problem(cfg, cfg.alpha[0], cfg.lam[0])
    steps = math.ceil(cfg.t_final / prob.solver.dt)
    solver = prob.solver.with_dt(cfg.t_final / steps)
    path = simulate_signal_observation(
        prob.physical_drift, prob.physical_params, ObservationModel.cosine(), cfg.x0, cfg.y0,
        solver.dt, cfg.t_final, cfg.seed, 0.5 * prob.h_physical,
    )  # fmt: skip

    zero = run_filter(solver, ObservationModel.polynomial([0.0]), prob.initial, path, cfg.snapshot_times())
    plain = solve(solver, prob.initial, cfg.snapshot_times())
    rel = max(
        float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(b.values)))
        for a, b in zip(zero.unnormalized, plain)
    )

    filt = run_filter(solver, ObservationModel.cosine(), prob.initial, path, cfg.snapshot_times())
    masses = [total_mass(solver.grid, p) for p in filt.posterior]
    criterion.note(f"reduction rel. dev. {rel:.1e}; posterior masses " + ", ".join(f"{m:.15f}" for m in masses))
    assert rel <= 1e-14
    assert len(masses) == len(cfg.snapshot_times())
    assert all(abs(m - 1.0) <= 1e-10 for m in masses)


@pytest.mark.criterion(10, "special-function oracles")
def test_c10_special_functions(criterion):
    g_ref = integrate.quad(lambda t: t**-1.5 * math.exp(-t), 1.0, math.inf, epsabs=0, epsrel=1e-13)[0]
    errs = {
        "gamma(-0.5,1)": abs(upper_incomplete_gamma(-0.5, 1.0) - g_ref),
        "zeta(0.5)": abs(riemann_zeta(0.5) - float(mp.zeta(0.5))),
        "zeta(-0.5)": abs(riemann_zeta(-0.5) - float(mp.zeta(-0.5))),
    }
    worst_rel = 0.0
    for a in (0.2, 0.5, 0.8, 1.2, 1.5, 1.8):
        for lam in (0.01, 0.1, 1.0):
            for s in (0.1, 1.0, 2.0):
                f = lambda y: math.exp(-lam * y) * y ** (-1.0 - a)
                ref = sum(
                    integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
                    for lo, hi in ((s, 2 * s), (2 * s, 10 * s), (10 * s, 100 * s), (100 * s, math.inf))
                )
                worst_rel = max(worst_rel, abs(tempered_tail_weight(a, lam, s) / ref - 1.0))
    criterion.note(", ".join(f"{k} err {v:.1e}" for k, v in errs.items()) + f"; tail weight rel err {worst_rel:.1e}")
    assert all(v <= 1e-10 for v in errs.values())
    assert worst_rel <= 1e-8


@pytest.mark.criterion(11, "sampler moments within 3 standard errors")
def test_c11_sampler_moments(criterion):
    params = TemperedStableParams.with_default_normalization(1.5, 1.0)
    dt, eps, n = 0.01, 0.01, 1_000_000
    inc, counts = JumpSampler(params, eps).increments(block_rng(2024, 0), dt, n)
    var_target = dt * second_moment_rate(params)
    sq = inc**2
    var_se = float(np.std(sq, ddof=1)) / math.sqrt(n)
    var_z = (float(np.mean(sq)) - var_target) / var_se
    rate = large_jump_rate(params, eps)
    rate_se = math.sqrt(rate * dt / n) / dt
    rate_z = (float(np.mean(counts)) / dt - rate) / rate_se
    criterion.note(f"variance z={var_z:+.2f}, jump rate z={rate_z:+.2f}")
    assert abs(var_z) <= 3.0
    assert abs(rate_z) <= 3.0


@pytest.mark.criterion(12, "byte-identical reruns")
def test_c12_determinism(criterion, verfymc_run, tmp_path):
    code, first, _ = verfymc_run
    assert code == 0
    assert main(["recipe", "verfymc", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in first.glob("*.csv"))
    same = [n for n in names if (first / n).read_bytes() == (tmp_path / n).read_bytes()]
    criterion.note(f"{len(same)}/{len(names)} CSV files identical")
    assert names and same == names
