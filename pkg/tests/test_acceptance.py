"""Acceptance suite.

Each test covers one numbered criterion and prints a PASS line (visible
with ``pytest -s``).  Heavy Monte Carlo artifacts are computed once per
session and shared across criteria.
"""

import dataclasses
import time

import numpy as np
import pytest

from irswpcn import harness
from irswpcn.channels import ChannelRealization, FadingConfig, realize
from irswpcn.convex import sca_energy_bound
from irswpcn.derived import derive_channel, effective_channel
from irswpcn.geometry import GeometryConfig
from irswpcn.model import (dl_amplify_power, harvested_energy_rate,
                           uplink_sinr)
from irswpcn.params import default_params
from irswpcn.solvers import (SolverConfig, closed_form_single_device_amplitudes,
                             solve_static, solve_uplink_adaptive,
                             solve_user_adaptive, update_chi, update_iota_rate,
                             update_iota_sinr)

from conftest import synthetic_derived, unit_params
from oracles import pg_downlink_harvest_oracle, two_phase_oracle

NUM_SEEDS = 50
CONFIG = SolverConfig()


def _report(criterion: int, detail: str):
    print(f"[PASS] acceptance criterion {criterion}: {detail}", flush=True)


def _instance(seed, n=10, k=4, x_ue=10.0, x_irs=10.0):
    geo = GeometryConfig(irs_x=x_irs, cluster_center_x=x_ue,
                         cluster_radius=1.0, num_devices=k)
    _, ch = realize(geo, FadingConfig(), n, seed, 0)
    return derive_channel(ch)


@pytest.fixture(scope="session")
def default_runs():
    """Fifty seeded instances at the simulation defaults, all three setups."""
    params = default_params()          # 25 dB amplitude cap
    runs = {"ue": [], "ul": [], "st": []}
    started = time.perf_counter()
    for seed in range(NUM_SEEDS):
        d = _instance(1000 + seed)
        rng = np.random.default_rng(seed)
        runs["ue"].append(solve_user_adaptive(params, d, CONFIG, rng))
        runs["ul"].append(solve_uplink_adaptive(params, d, CONFIG, rng))
        runs["st"].append(solve_static(params, d, CONFIG, rng))
    runs["elapsed"] = time.perf_counter() - started
    return runs


def _sweep_config(**overrides):
    base = harness.default_config()
    base = dataclasses.replace(base, num_realizations=NUM_SEEDS,
                               master_seed=2000)
    return dataclasses.replace(base, **overrides)


@pytest.fixture(scope="session")
def pa_sweep(tmp_path_factory):
    cfg = _sweep_config(schemes=("ue_active", "ue_passive"), a_max_db=(25.0,),
                        sweep_variable="p_a_dbm",
                        sweep_grid=(10.0, 15.0, 20.0, 25.0, 30.0))
    out = harness.run_sweep(cfg, out_dir=str(tmp_path_factory.mktemp("pa")),
                            workers=2)
    return _load_aggregate(out["aggregate"])


@pytest.fixture(scope="session")
def coverage_sweep(tmp_path_factory):
    cfg = _sweep_config(schemes=("ue_active", "ue_passive"), a_max_db=(10.0,),
                        sweep_variable="x_ue", tie_x_irs_to_x_ue=True,
                        sweep_grid=(2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0))
    out = harness.run_sweep(cfg, out_dir=str(tmp_path_factory.mktemp("cov")),
                            workers=2)
    return _load_aggregate(out["aggregate"])


@pytest.fixture(scope="session")
def placement_sweep(tmp_path_factory):
    cfg = _sweep_config(schemes=("static_active",), a_max_db=(25.0,),
                        sweep_variable="x_irs", sweep_grid=(5.0, 10.0))
    out = harness.run_sweep(cfg, out_dir=str(tmp_path_factory.mktemp("plc")),
                            workers=2)
    return _load_aggregate(out["aggregate"])


def _load_aggregate(path):
    rows = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = dict(zip(header, line.strip().split(",")))
            key = (float(cells["sweep_value"]), cells["scheme"])
            rows[key] = {"mean": float(cells["objective_mean"]),
                         "energy": float(cells["energy_mean"]),
                         "count": int(cells["count"])}
    return rows


# ---------------------------------------------------------------------------


def test_criterion_1_monotone_ascent(default_runs):
    worst = np.inf
    for kind in ("ue", "ul", "st"):
        for sol in default_runs[kind]:
            trace = np.asarray(sol.objective_trace)
            if trace.size > 1:
                worst = min(worst, float(np.min(np.diff(trace))))
            assert np.all(np.diff(trace) >= -1e-8), f"{kind} trace decreased"
            assert sol.wall_time < 60.0
    assert default_runs["elapsed"] < 1800.0
    _report(1, f"150 traces nondecreasing (worst step {worst:.2e}), "
               f"{default_runs['elapsed']:.0f}s total")


def test_criterion_2_feasible_at_exit(default_runs):
    worst = np.inf
    for kind in ("ue", "ul", "st"):
        for sol in default_runs[kind]:
            assert sol.feasibility.feasible, f"{kind} infeasible at exit"
            worst = min(worst, sol.feasibility.worst)
    _report(2, f"150/150 feasible at 1e-6 (worst slack {worst:.2e})")


def test_criterion_3_setup_ordering(default_runs):
    ok = 0
    ue = np.array([s.objective for s in default_runs["ue"]])
    ul = np.array([s.objective for s in default_runs["ul"]])
    st = np.array([s.objective for s in default_runs["st"]])
    ok = np.sum((ue + 1e-4 >= ul) & (ul + 1e-4 >= st))
    assert ok >= 0.95 * NUM_SEEDS, f"ordering held on only {ok}/{NUM_SEEDS} seeds"
    assert ul.mean() > st.mean(), "uplink-adaptive must strictly beat static on average"
    _report(3, f"ordering on {ok}/{NUM_SEEDS} seeds; "
               f"means ue={ue.mean():.3f} ul={ul.mean():.3f} st={st.mean():.3f}")


def test_criterion_4_closed_form_amplitude_oracle():
    params = default_params(num_elements=8, num_devices=1, a_max_db=80.0)
    max_rel, min_sep = 0.0, np.inf
    for seed in range(20):
        geo = GeometryConfig(irs_x=6.0, cluster_center_x=6.0,
                             cluster_radius=1.0, num_devices=1)
        _, ch = realize(geo, FadingConfig(rician_factor=np.inf), 8,
                        3000 + seed, 0)
        d = derive_channel(ch)
        amps, phases = closed_form_single_device_amplitudes(params, d, "dl")
        assert np.all(amps < params.a_max), "instance not in the unclipped regime"
        v0 = amps * np.exp(1j * phases)
        closed = harvested_energy_rate(params, d, 0, v0)
        _, oracle = pg_downlink_harvest_oracle(params, d, seed=seed)
        rel = abs(closed - oracle) / oracle
        max_rel = max(max_rel, rel)
        assert closed == pytest.approx(oracle, rel=1e-3)
        assert dl_amplify_power(params, d, v0) == pytest.approx(params.p_f, rel=1e-9)
        a_ul, _ = closed_form_single_device_amplitudes(params, d, "ul", p=1e-6)
        sep = float(np.max(np.abs(amps - a_ul)))
        min_sep = min(min_sep, sep)
        assert sep > 1e-6
    _report(4, f"20 instances: oracle gap <= {max_rel:.2e}, budget tight, "
               f"amplitude separation >= {min_sep:.2e}")


def test_criterion_5_sca_surrogate():
    rng = np.random.default_rng(99)
    params = unit_params(n=5, k=3)
    worst_tan, worst_excess = 0.0, -np.inf
    for _ in range(1000):
        d = synthetic_derived(rng, n=5, k=3)
        k = int(rng.integers(0, 3))
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        v_hat = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        exact = (params.p_a * abs(effective_channel(d, k, v)) ** 2
                 + params.sigma_n1 * np.real(np.vdot(v, d.hr_abs2[k] * v)))
        exact_hat = (params.p_a * abs(effective_channel(d, k, v_hat)) ** 2
                     + params.sigma_n1 * np.real(np.vdot(v_hat, d.hr_abs2[k] * v_hat)))
        q_hat = sca_energy_bound(params, d, k, v_hat, v_hat)
        q = sca_energy_bound(params, d, k, v, v_hat)
        worst_tan = max(worst_tan, abs(q_hat - exact_hat) / max(exact_hat, 1e-30))
        worst_excess = max(worst_excess, q - exact)
        assert abs(q_hat - exact_hat) <= 1e-12 * max(exact_hat, 1.0)
        assert q <= exact + 1e-9
    _report(5, f"tangency <= {worst_tan:.2e}, bound excess <= {worst_excess:.2e} "
               "on 1000 pairs")


def test_criterion_6_fp_updates():
    rng = np.random.default_rng(7)
    params = unit_params(n=4, k=2)
    worst_grad, worst_chi = 0.0, 0.0
    for _ in range(100):
        d = synthetic_derived(rng, n=4, k=2)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        k = int(rng.integers(0, 2))
        p = abs(rng.standard_normal()) + 0.05

        iota = update_iota_sinr(params, d, k, v)
        z = effective_channel(d, k, v)
        den = params.sigma_n2 * np.real(np.vdot(v, d.g_abs2 * v)) + params.sigma_z2
        f = lambda i: 2 * np.real(np.conj(i) * z) - abs(i) ** 2 * den
        worst_grad = max(worst_grad, _fd_gradient(f, iota))

        chi = update_chi(params, d, k, p, v)
        ref = uplink_sinr(params, d, k, v, p)
        worst_chi = max(worst_chi, abs(chi - ref) / max(ref, 1e-30))

        iota2 = update_iota_rate(params, d, k, params.weights[k], 0.4, p, chi, v)
        den2 = p * abs(z) ** 2 + den
        s = np.sqrt(params.weights[k] * 0.4 * (1 + chi) * p)
        f2 = lambda i: 2 * np.real(np.conj(i) * s * z) - abs(i) ** 2 * den2
        worst_grad = max(worst_grad, _fd_gradient(f2, iota2))

    assert worst_grad < 1e-6
    assert worst_chi < 1e-12
    _report(6, f"auxiliary updates stationary (grad <= {worst_grad:.2e}), "
               f"SINR match <= {worst_chi:.2e}")


def _fd_gradient(f, x0):
    h = max(abs(x0), 1.0) * 1e-6
    g_re = (f(x0 + h) - f(x0 - h)) / (2 * h)
    g_im = (f(x0 + 1j * h) - f(x0 - 1j * h)) / (2 * h)
    scale = max(abs(f(x0)), 1e-12) / max(abs(x0), 1e-12)
    return float(np.hypot(g_re, g_im) / scale)


def test_criterion_7_active_beats_passive_over_power(pa_sweep):
    grid = (10.0, 15.0, 20.0, 25.0, 30.0)
    ratios = []
    for p in grid:
        act = pa_sweep[(p, "ue_active")]["mean"]
        pas = pa_sweep[(p, "ue_passive")]["mean"]
        assert act > pas, f"active did not beat passive at {p} dBm"
        ratios.append(act / pas)
    assert int(np.argmax(ratios)) == 0, "largest gain must sit at the lowest power"
    _report(7, "active > passive at all 5 powers; gain ratios "
               + ", ".join(f"{r:.1f}" for r in ratios))


def test_criterion_8_energy_accounting(pa_sweep):
    act = pa_sweep[(20.0, "ue_active")]["energy"]
    pas = pa_sweep[(20.0, "ue_passive")]["energy"]
    assert pas > act, "passive must consume more energy at the defaults"
    _report(8, f"mean energy passive {pas:.4f} J > active {act:.4f} J")


def test_criterion_9_placement(placement_sweep):
    near = placement_sweep[(10.0, "static_active")]["mean"]
    far = placement_sweep[(5.0, "static_active")]["mean"]
    assert near > far, "static setup must prefer the IRS near the devices"
    _report(9, f"static mean at x_irs=10: {near:.3f} > x_irs=5: {far:.3f}")


def test_criterion_10_coverage(coverage_sweep):
    grid = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    level = 4.0

    def coverage(scheme):
        xs = [x for x in grid if coverage_sweep[(x, scheme)]["mean"] >= level]
        return max(xs) if xs else 0.0

    active = coverage("ue_active")
    passive = coverage("ue_passive")
    assert active > passive, "active coverage must exceed passive coverage"
    _report(10, f"4 bits/Hz reach: active {active:g} m > passive {passive:g} m")


def test_criterion_11_no_irs_reduction():
    params = default_params(num_elements=10, num_devices=1)
    worst = 0.0
    for seed in range(10):
        geo = GeometryConfig(irs_x=10.0, cluster_center_x=10.0,
                             cluster_radius=1.0, num_devices=1)
        _, ch = realize(geo, FadingConfig(), 10, 4000 + seed, 0)
        d = derive_channel(ChannelRealization(
            g=np.zeros(10, complex), h_r=ch.h_r, h_d=ch.h_d))
        _, oracle = two_phase_oracle(params, d)
        for solver in (solve_user_adaptive, solve_uplink_adaptive, solve_static):
            sol = solver(params, d, CONFIG, np.random.default_rng(seed))
            rel = abs(sol.objective - oracle) / oracle
            worst = max(worst, rel)
            assert sol.objective == pytest.approx(oracle, rel=1e-4)
    _report(11, f"30 solves matched the golden-section oracle (worst {worst:.2e})")


def test_criterion_12_sweep_determinism(tmp_path):
    cfg = dataclasses.replace(
        harness.default_config(), num_elements=4, num_devices=2,
        schemes=("ue_active", "static_active"), a_max_db=(25.0,),
        sweep_grid=(20.0,), num_realizations=2, master_seed=77,
        ao_max_iterations=10)
    outs = [harness.run_sweep(cfg, out_dir=str(tmp_path / f"r{i}"), workers=w)
            for i, w in enumerate((1, 1, 2))]
    blobs = [open(o["records"], "rb").read() for o in outs]
    aggs = [open(o["aggregate"], "rb").read() for o in outs]
    assert blobs[0] == blobs[1] == blobs[2]
    assert aggs[0] == aggs[1] == aggs[2]
    _report(12, "byte-identical records/aggregate across reruns and worker counts")
