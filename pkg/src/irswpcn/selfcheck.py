"""Fast invariant checks on small instances, used by the `check` command."""

import numpy as np

from . import convex, solvers
from .channels import ChannelRealization, FadingConfig, realize
from .derived import derive_channel, effective_channel
from .geometry import GeometryConfig
from .params import default_params
from .units import dbm_to_watts, watts_to_dbm


def _random_instance(rng, n=4, k=2):
    g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    h_r = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    h_d = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
    return derive_channel(ChannelRealization(g=g, h_r=h_r, h_d=h_d))


def check_lifted_identity(rng) -> tuple:
    worst = 0.0
    for _ in range(100):
        d = _random_instance(rng)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        lifted = np.concatenate([v, [1.0]])
        for k in range(2):
            direct = abs(effective_channel(d, k, v)) ** 2
            quad = np.real(lifted.conj() @ d.lifted_gram[k] @ lifted)
            worst = max(worst, abs(direct - quad) / max(direct, 1e-30))
    return "lifted-form identity (rel err < 1e-10)", worst < 1e-10, f"worst={worst:.2e}"


def check_quadratic_identity(rng) -> tuple:
    worst = 0.0
    for _ in range(100):
        d = _random_instance(rng)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        lhs = np.real(np.vdot(v, d.g_abs2 * v))
        rhs = float(sum(abs(d.g[i]) ** 2 * abs(v[i]) ** 2 for i in range(4)))
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-30))
    return "diagonal quadratic-form identity", worst < 1e-12, f"worst={worst:.2e}"


def check_sca_bound(rng) -> tuple:
    params = default_params(num_elements=4, num_devices=2)
    tangency, bound = 0.0, -np.inf
    for _ in range(200):
        d = _random_instance(rng)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        vhat = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        for k in range(2):
            exact = (params.p_a * abs(effective_channel(d, k, v)) ** 2
                     + params.sigma_n1 * np.real(np.vdot(v, d.hr_abs2[k] * v)))
            exact_hat = (params.p_a * abs(effective_channel(d, k, vhat)) ** 2
                         + params.sigma_n1 * np.real(np.vdot(vhat, d.hr_abs2[k] * vhat)))
            q_at_hat = convex.sca_energy_bound(params, d, k, vhat, vhat)
            q = convex.sca_energy_bound(params, d, k, v, vhat)
            tangency = max(tangency, abs(q_at_hat - exact_hat) / max(exact_hat, 1e-30))
            bound = max(bound, q - exact)
    ok = tangency < 1e-12 and bound <= 1e-9
    return "surrogate tangency and lower bound", ok, f"tang={tangency:.2e} excess={bound:.2e}"


def check_fp_updates(rng) -> tuple:
    params = default_params(num_elements=4, num_devices=2)
    d = _random_instance(rng)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    ok = True
    for k in range(2):
        iota = solvers.update_iota_sinr(params, d, k, v)
        den = params.sigma_n2 * np.real(np.vdot(v, d.g_abs2 * v)) + params.sigma_z2
        grad = 2 * effective_channel(d, k, v) - 2 * iota * den
        ok &= abs(grad) * abs(iota) < 1e-6 * max(abs(iota) ** 2 * den, 1e-30)
        chi = solvers.update_chi(params, d, k, 0.5, v)
        from .model import uplink_sinr
        ok &= abs(chi - uplink_sinr(params, d, k, v, 0.5)) < 1e-12 * max(chi, 1e-30)
    return "fractional-programming updates stationary", bool(ok), ""


def check_units() -> tuple:
    worst = 0.0
    for dbm in (-90.0, -30.0, 0.0, 5.0, 20.0, 30.0):
        rt = watts_to_dbm(dbm_to_watts(dbm))
        worst = max(worst, abs(rt - dbm) / max(abs(dbm), 1.0))
    return "dBm round trip exact", worst < 1e-12, f"worst={worst:.2e}"


def check_small_solve() -> tuple:
    params = default_params(num_elements=4, num_devices=2)
    geo = GeometryConfig(irs_x=10.0, cluster_center_x=10.0,
                         cluster_radius=1.0, num_devices=2)
    _, ch = realize(geo, FadingConfig(), 4, master_seed=3, realization=0)
    sol = solvers.solve_uplink_adaptive(params, ch, solvers.SolverConfig(
        ao_max_iterations=8), np.random.default_rng(0))
    trace = np.asarray(sol.objective_trace)
    mono = bool(np.all(np.diff(trace) >= -1e-8))
    return ("small uplink-adaptive solve monotone and feasible",
            mono and sol.feasibility.feasible,
            f"objective={sol.objective:.4f}")


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    checks = [
        check_lifted_identity(rng),
        check_quadratic_identity(rng),
        check_sca_bound(rng),
        check_fp_updates(rng),
        check_units(),
        check_small_solve(),
    ]
    return checks
