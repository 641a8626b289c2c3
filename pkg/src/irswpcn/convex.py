"""Convex subproblems used by the alternating-optimization drivers.

Four solve families live here:

* the rank-relaxed lifted program over (tau0, {tau_k}, {f_k}, W0) that
  jointly picks the time/energy split and the downlink reflection in
  lifted form;
* the same time/power program with the downlink vector fixed (no lift);
* the per-device uplink reflection problem (single quadratic budget plus
  per-element caps), solved exactly by dual bisection;
* the shared-reflection problem over one vector serving all devices, with
  an optional linearized energy-causality constraint.

The conic programs are built once per problem shape with cvxpy parameters
and re-solved with updated data (one workspace cache per process; solves
do not share mutable state across instances).
"""

import math
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .derived import DerivedChannel, effective_channel
from .model import ResourceAllocation
from .params import SystemParams

LN2 = math.log(2.0)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"

_CVXPY_STATUS = {
    cp.OPTIMAL: OPTIMAL,
    cp.OPTIMAL_INACCURATE: MAX_ITERATIONS,
    cp.INFEASIBLE: INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: INFEASIBLE,
    cp.UNBOUNDED: INFEASIBLE,
    cp.UNBOUNDED_INACCURATE: INFEASIBLE,
}


class SolverFailure(RuntimeError):
    """Inner conic solve failed where no fallback is possible."""


class RandomizationInfeasible(RuntimeError):
    """No randomization candidate supports the current allocation.

    Carries the best-scoring candidate so callers may re-solve the
    allocation around it.
    """

    def __init__(self, message: str, candidate: np.ndarray):
        super().__init__(message)
        self.candidate = candidate


@dataclass(frozen=True)
class ConicConfig:
    """Accuracy knobs passed through to the interior-point backend."""

    tol_gap_abs: float = 1e-9
    tol_gap_rel: float = 1e-9
    tol_feas: float = 1e-9
    max_iter: int = 200

    def solve_kwargs(self) -> dict:
        return dict(solver=cp.CLARABEL, tol_gap_abs=self.tol_gap_abs,
                    tol_gap_rel=self.tol_gap_rel, tol_feas=self.tol_feas,
                    max_iter=self.max_iter)


@dataclass(frozen=True)
class ConvexSolveResult:
    status: str
    objective: float          # analytic objective re-evaluated at the iterate
    tolerance: float          # configured relative gap
    iterations: int = 0


@dataclass(frozen=True)
class SdpLiftVariable:
    """Lifted downlink reflection W0 (= tau0 * outer(v0~, v0~) at rank one)."""

    w0: np.ndarray
    tau0: float


def _status_of(problem: cp.Problem) -> str:
    return _CVXPY_STATUS.get(problem.status, MAX_ITERATIONS)


def _vecvals(v) -> np.ndarray:
    return v.values if hasattr(v, "values") else np.asarray(v)


def _rate_value(weights, tau, gammas, f) -> float:
    """sum_k w_k tau_k log2(1 + gamma_k f_k / tau_k), with the tau=0 limit."""
    tau = np.asarray(tau, float)
    f = np.asarray(f, float)
    out = 0.0
    for k in range(tau.size):
        if tau[k] > 0:
            out += weights[k] * tau[k] * np.log2(1.0 + gammas[k] * f[k] / tau[k])
    return float(out)


# ---------------------------------------------------------------------------
# workspace cache


_CACHE: dict = {}


def clear_workspace_cache():
    _CACHE.clear()


def _warmup(ws):
    """Run one throwaway solve right after compilation.

    The first solve of a parametrized problem builds solver data through the
    full reduction chain; later solves use the cached parameter map, whose
    floating-point path differs in the last bits.  Warming up here makes
    every real solve take the cached path, so results are identical no
    matter how work is split across processes.
    """
    for p in _iter_params(ws["par"]):
        shape = p.shape
        if p.attributes.get("symmetric"):
            p.value = np.eye(shape[0])
        else:
            p.value = np.zeros(shape) if shape else 0.0
    for key in ("tmax", "amax2"):
        if key in ws["par"]:
            ws["par"][key].value = 1.0
    try:
        ws["prob"].solve(solver=cp.CLARABEL, max_iter=20)
    except cp.error.SolverError:
        pass


def _iter_params(tree):
    for value in tree.values():
        if isinstance(value, list):
            yield from value
        else:
            yield value


def _tp_sdp_workspace(n: int, k: int, pf_finite: bool):
    # complex parameters would disable cvxpy's parametrized-program cache,
    # so Hermitian data enters as real symmetric/antisymmetric pairs
    key = ("tp_sdp", n, k, pf_finite)
    if key in _CACHE:
        return _CACHE[key]
    tau0 = cp.Variable(nonneg=True)
    tau = cp.Variable(k, nonneg=True)
    ft = cp.Variable(k, nonneg=True)          # transmit energies / scale
    s = cp.Variable(k)                        # epigraph of -tau log(1 + g f / tau)
    w = cp.Variable((n + 1, n + 1), hermitian=True)

    par = {
        "gam": cp.Parameter(k, nonneg=True),
        "em_re": [cp.Parameter((n + 1, n + 1), symmetric=True) for _ in range(k)],
        "em_im": [cp.Parameter((n + 1, n + 1)) for _ in range(k)],
        "eta_sn1": cp.Parameter(nonneg=True),
        "wobj": cp.Parameter(k, nonneg=True),
        "tmax": cp.Parameter(nonneg=True),
        "amax2": cp.Parameter(nonneg=True),
    }
    cons = [s[i] >= cp.rel_entr(tau[i], tau[i] + par["gam"][i] * ft[i]) for i in range(k)]
    cons += [ft[i] + par["eta_sn1"] * tau0
             <= cp.real(cp.trace((par["em_re"][i] + 1j * par["em_im"][i]) @ w))
             for i in range(k)]
    cons += [tau0 + cp.sum(tau) <= par["tmax"]]
    cons += [cp.real(cp.diag(w)[:n]) <= par["amax2"] * tau0]
    cons += [cp.real(w[n, n]) == tau0, w >> 0]
    if pf_finite:
        par["am"] = cp.Parameter((n + 1, n + 1), symmetric=True)   # DL budget / scale
        par["c2"] = cp.Parameter(k, nonneg=True)                   # UL budget rows / scale
        par["n2s"] = cp.Parameter(k, nonneg=True)
        cons += [cp.real(cp.trace(par["am"] @ w)) <= tau0]
        cons += [cp.multiply(ft, par["c2"]) + cp.multiply(par["n2s"], tau) <= tau]
    prob = cp.Problem(cp.Maximize(-par["wobj"] @ s), cons)
    ws = {"prob": prob, "tau0": tau0, "tau": tau, "ft": ft, "w": w, "par": par}
    _warmup(ws)
    _CACHE[key] = ws
    return ws


def _tp_fixed_workspace(k: int, pf_finite: bool):
    key = ("tp_fixed", k, pf_finite)
    if key in _CACHE:
        return _CACHE[key]
    tau0 = cp.Variable(nonneg=True)
    tau = cp.Variable(k, nonneg=True)
    ft = cp.Variable(k, nonneg=True)
    s = cp.Variable(k)
    par = {
        "gam": cp.Parameter(k, nonneg=True),
        "erate": cp.Parameter(k, nonneg=True),    # harvested energy per tau0 / scale
        "wobj": cp.Parameter(k, nonneg=True),
        "tmax": cp.Parameter(nonneg=True),
    }
    cons = [s[i] >= cp.rel_entr(tau[i], tau[i] + par["gam"][i] * ft[i]) for i in range(k)]
    cons += [ft <= tau0 * par["erate"]]
    cons += [tau0 + cp.sum(tau) <= par["tmax"]]
    if pf_finite:
        par["c2"] = cp.Parameter(k, nonneg=True)
        par["n2s"] = cp.Parameter(k, nonneg=True)
        cons += [cp.multiply(ft, par["c2"]) + cp.multiply(par["n2s"], tau) <= tau]
    prob = cp.Problem(cp.Maximize(-par["wobj"] @ s), cons)
    ws = {"prob": prob, "tau0": tau0, "tau": tau, "ft": ft, "par": par}
    _warmup(ws)
    _CACHE[key] = ws
    return ws


def _shared_workspace(n: int, k: int, kind: str, pf_finite: bool):
    # internally normalized: v in units of a_max (unit box), u = |v|^2,
    # t_k = |z_k|^2 in units of its own channel cap
    key = ("shared", n, k, kind, pf_finite)
    if key in _CACHE:
        return _CACHE[key]
    v = cp.Variable(n, complex=True)
    u = cp.Variable(n, nonneg=True)           # per-element |v_n|^2 epigraph
    t = cp.Variable(k, nonneg=True)           # per-device |z_k|^2 epigraph
    par = {
        "av_re": cp.Parameter(n), "av_im": cp.Parameter(n),
        "beta": cp.Parameter(k, nonneg=True),
        "wq1": cp.Parameter(n, nonneg=True),
        "hd_re": cp.Parameter(k), "hd_im": cp.Parameter(k),
        "bc_re": [cp.Parameter(n) for _ in range(k)],
        "bc_im": [cp.Parameter(n) for _ in range(k)],
    }
    avec = par["av_re"] + 1j * par["av_im"]
    cons = [cp.square(cp.abs(v)) <= u, u <= 1.0, cp.abs(v) <= 1.0]
    cons += [t[i] >= cp.square(cp.abs(par["hd_re"][i] + 1j * par["hd_im"][i]
                                      + (par["bc_re"][i] + 1j * par["bc_im"][i]) @ v))
             for i in range(k)]
    cons += [t <= 1.0 + 1e-9]
    if pf_finite:
        par["dvec"] = [cp.Parameter(n, nonneg=True) for _ in range(k)]
        cons += [par["dvec"][i] @ u <= 1.0 for i in range(k)]
    if kind == "st":
        if pf_finite:
            par["bvec"] = cp.Parameter(n, nonneg=True)
            cons += [par["bvec"] @ u <= 1.0]
        par["sv_re"] = [cp.Parameter(n) for _ in range(k)]
        par["sv_im"] = [cp.Parameter(n) for _ in range(k)]
        par["srhs"] = cp.Parameter(k)
        cons += [par["srhs"][i]
                 <= 2.0 * cp.real((par["sv_re"][i] + 1j * par["sv_im"][i]) @ v)
                 for i in range(k)]
    prob = cp.Problem(cp.Maximize(2.0 * cp.real(avec @ v) - par["beta"] @ t
                                  - par["wq1"] @ u), cons)
    ws = {"prob": prob, "v": v, "par": par}
    _warmup(ws)
    _CACHE[key] = ws
    return ws


# ---------------------------------------------------------------------------
# time/power programs


def _energy_scale(params: SystemParams, derived: DerivedChannel) -> float:
    """Upper bound on any per-device transmit energy; conditions the solve."""
    best = 0.0
    for k in range(params.num_devices):
        reach = (abs(derived.h_d[k]) + params.a_max * np.sum(np.abs(derived.cascade[k]))) ** 2
        noise = params.sigma_n1 * params.a_max ** 2 * np.sum(derived.hr_abs2[k])
        best = max(best, params.eta * (params.p_a * reach + noise) * params.t_max)
    return best if best > 0 else 1.0


def _ul_quadforms(derived: DerivedChannel, ul_vectors) -> tuple:
    """v^H Q2k v and ||v||^2 for each device's uplink vector."""
    c2, n2 = [], []
    for k, vk in enumerate(ul_vectors):
        vv = _vecvals(vk)
        c2.append(float(np.real(np.vdot(vv, derived.hr_abs2[k] * vv))))
        n2.append(float(np.real(np.vdot(vv, vv))))
    return np.array(c2), np.array(n2)


def _clean_allocation(params, tau0, tau, f, c2, n2, erate=None):
    """Exact post-solve repair of an allocation iterate.

    Vanishing time slices are zeroed (their rate is negligible but the
    implied power f/tau can amplify solver tolerance into real budget
    violations), and each transmit energy is clipped to its per-device
    amplifier cap and, when known, the harvested energy.
    """
    tau0 = max(float(tau0), 0.0)
    tau = np.maximum(np.asarray(tau, float), 0.0)
    f = np.maximum(np.asarray(f, float), 0.0)
    dead = tau < 1e-12
    tau = np.where(dead, 0.0, tau)
    f = np.where(dead, 0.0, f)
    if np.isfinite(params.p_f) and c2 is not None:
        headroom = np.maximum(params.p_f - params.sigma_n2 * n2, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cap = np.where(c2 > 0, tau * headroom / np.where(c2 > 0, c2, 1.0), np.inf)
        f = np.minimum(f, cap)
    if erate is not None:
        f = np.minimum(f, tau0 * np.asarray(erate, float))
    return tau0, tau, f


def solve_time_power_sdp(params: SystemParams, derived: DerivedChannel,
                         gammas, ul_vectors, config: ConicConfig = ConicConfig()):
    """Rank-relaxed allocation subproblem.

    ``gammas`` are per-device SINRs per unit transmit power at the current
    uplink vectors; ``ul_vectors`` supply the uplink amplifier budget rows.
    Returns (allocation, lift, result); allocation/lift are None unless the
    solve produced an iterate.
    """
    n, k = params.num_elements, params.num_devices
    gammas = np.asarray(gammas, float)
    pf_finite = np.isfinite(params.p_f)
    ws = _tp_sdp_workspace(n, k, pf_finite)
    par = ws["par"]

    sf = _energy_scale(params, derived)
    par["gam"].value = gammas * sf
    for i in range(k):
        m = params.eta * (params.p_a * derived.lifted_gram[i]
                          + params.sigma_n1 * np.diag(derived.hr_abs2_lift[i])) / sf
        m = (m + m.conj().T) / 2
        par["em_re"][i].value = (m.real + m.real.T) / 2
        par["em_im"][i].value = (m.imag - m.imag.T) / 2
    par["eta_sn1"].value = params.eta * params.sigma_n1 / sf
    # weight normalization keeps the solve identical under proportional
    # weight scaling (the argmax is scale-invariant)
    par["wobj"].value = params.weights / (LN2 * np.max(params.weights))
    par["tmax"].value = params.t_max
    par["amax2"].value = params.a_max ** 2
    if pf_finite:
        den = params.p_f + params.p_a + params.sigma_n1
        am = (params.p_a * np.diag(derived.g_abs2_lift)
              + params.sigma_n1 * np.eye(n + 1)) / den
        par["am"].value = (am + am.T) / 2
        c2, n2 = _ul_quadforms(derived, ul_vectors)
        par["c2"].value = c2 * sf / params.p_f
        par["n2s"].value = params.sigma_n2 * n2 / params.p_f

    prob = ws["prob"]
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(**config.solve_kwargs())
    except cp.error.SolverError:
        return None, None, ConvexSolveResult(MAX_ITERATIONS, -np.inf, config.tol_gap_rel)
    status = _status_of(prob)
    if ws["tau0"].value is None:
        return None, None, ConvexSolveResult(status, -np.inf, config.tol_gap_rel)

    c2n2 = _ul_quadforms(derived, ul_vectors) if pf_finite else (None, None)
    tau0, tau, f = _clean_allocation(params, ws["tau0"].value, ws["tau"].value,
                                     np.asarray(ws["ft"].value, float) * sf,
                                     c2n2[0], c2n2[1])
    alloc = ResourceAllocation.from_tau_f(tau0, tau, f)
    lift = SdpLiftVariable(w0=np.asarray(ws["w"].value), tau0=tau0)
    obj = _rate_value(params.weights, tau, gammas, f)
    iters = prob.solver_stats.num_iters if prob.solver_stats else 0
    return alloc, lift, ConvexSolveResult(status, obj, config.tol_gap_rel, iters)


def solve_time_power_convex(params: SystemParams, derived: DerivedChannel,
                            gammas, v0, config: ConicConfig = ConicConfig(),
                            ul_vectors=None):
    """Allocation subproblem with the downlink vector fixed.

    Defaults to the static setup (the fixed vector also serves the uplink);
    pass explicit ``ul_vectors`` for the user/uplink-adaptive final pass.
    """
    from .model import dl_amplify_power, harvested_energy_rate

    k = params.num_devices
    gammas = np.asarray(gammas, float)
    v0v = _vecvals(v0)
    if ul_vectors is None:
        ul_vectors = [v0v] * k
    pf_finite = np.isfinite(params.p_f)
    if pf_finite and dl_amplify_power(params, derived, v0v) > params.p_f * (1 + 1e-9) + 1e-15:
        return None, ConvexSolveResult(INFEASIBLE, -np.inf, config.tol_gap_rel)

    ws = _tp_fixed_workspace(k, pf_finite)
    par = ws["par"]
    sf = _energy_scale(params, derived)
    erate = np.array([harvested_energy_rate(params, derived, i, v0v) for i in range(k)])
    par["gam"].value = gammas * sf
    par["erate"].value = erate / sf
    par["wobj"].value = params.weights / (LN2 * np.max(params.weights))
    par["tmax"].value = params.t_max
    if pf_finite:
        c2, n2 = _ul_quadforms(derived, ul_vectors)
        par["c2"].value = c2 * sf / params.p_f
        par["n2s"].value = params.sigma_n2 * n2 / params.p_f

    prob = ws["prob"]
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(**config.solve_kwargs())
    except cp.error.SolverError:
        return None, ConvexSolveResult(MAX_ITERATIONS, -np.inf, config.tol_gap_rel)
    status = _status_of(prob)
    if ws["tau0"].value is None:
        return None, ConvexSolveResult(status, -np.inf, config.tol_gap_rel)
    c2n2 = _ul_quadforms(derived, ul_vectors) if pf_finite else (None, None)
    tau0, tau, f = _clean_allocation(params, ws["tau0"].value, ws["tau"].value,
                                     np.asarray(ws["ft"].value, float) * sf,
                                     c2n2[0], c2n2[1], erate=erate)
    alloc = ResourceAllocation.from_tau_f(tau0, tau, f)
    obj = _rate_value(params.weights, tau, gammas, f)
    iters = prob.solver_stats.num_iters if prob.solver_stats else 0
    return alloc, ConvexSolveResult(status, obj, config.tol_gap_rel, iters)


# ---------------------------------------------------------------------------
# per-device reflection (exact dual bisection)


def solve_device_reflection(params: SystemParams, derived: DerivedChannel,
                            k: int, p_k: float, iota_k: complex,
                            config: ConicConfig = ConicConfig()):
    """Maximize 2 Re{iota^H (h_d^H + b^H v)} - |iota|^2 (s_n2 v^H Q1 v + s_z2)
    over one device's uplink amplifier budget and per-element caps.

    The objective separates per element once phases align with the linear
    coefficient, and the single quadratic budget admits an exact KKT
    multiplier found by bisection.
    """
    if p_k < 0:
        raise ValueError("transmit power must be nonnegative")
    n = params.num_elements
    if iota_k == 0:
        return np.zeros(n, complex), ConvexSolveResult(OPTIMAL, 0.0, 0.0)

    c = iota_k * derived.cascade[k]                    # linear coefficient per element
    cmag = np.abs(c)
    d = (abs(iota_k) ** 2) * params.sigma_n2 * derived.g_abs2
    e = p_k * derived.hr_abs2[k] + params.sigma_n2     # budget weights

    def primal(mu: float) -> np.ndarray:
        den = d + mu * e
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, cmag / np.where(den > 0, den, 1.0), np.inf)
        r = np.where(cmag == 0, 0.0, r)
        return np.minimum(r, params.a_max)

    def used(r: np.ndarray) -> float:
        return float(np.sum(e * r ** 2))

    r = primal(0.0)
    if np.isfinite(params.p_f) and used(r) > params.p_f:
        lo, hi = 0.0, 1.0
        while used(primal(hi)) > params.p_f:
            hi *= 4.0
            if hi > 1e300:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if used(primal(mid)) > params.p_f:
                lo = mid
            else:
                hi = mid
        r = primal(hi)
    v = r * np.exp(1j * np.angle(c))
    v[cmag == 0] = 0.0

    z = effective_channel(derived, k, v)
    quad = np.real(np.vdot(v, derived.g_abs2 * v))
    obj = (2.0 * np.real(np.conj(iota_k) * z)
           - abs(iota_k) ** 2 * (params.sigma_n2 * quad + params.sigma_z2))
    return v, ConvexSolveResult(OPTIMAL, float(obj), 0.0)


# ---------------------------------------------------------------------------
# shared reflection


def _sca_coefficients(params: SystemParams, derived: DerivedChannel,
                      k: int, expansion: np.ndarray):
    """Affine minorant of the harvested-power expression at the given point:
    value(v) >= c + 2 Re{lvec . v} with tangency at the expansion point."""
    zhat = effective_channel(derived, k, expansion)
    q2 = derived.hr_abs2[k]
    c = (-params.sigma_n1 * float(np.real(np.vdot(expansion, q2 * expansion)))
         - params.p_a * abs(zhat) ** 2
         + 2.0 * params.p_a * np.real(np.conj(zhat) * np.conj(derived.h_d[k])))
    lvec = (params.sigma_n1 * q2 * np.conj(expansion)
            + params.p_a * np.conj(zhat) * np.conj(derived.cascade[k]))
    return c, lvec


def sca_energy_bound(params: SystemParams, derived: DerivedChannel,
                     k: int, v, expansion) -> float:
    """Linear lower bound on P_A |h_d^H + b^H v|^2 + s_n1 v^H Q2 v."""
    vv, ev = _vecvals(v), _vecvals(expansion)
    c, lvec = _sca_coefficients(params, derived, k, ev)
    return float(c + 2.0 * np.real(lvec @ vv))


def solve_shared_reflection(params: SystemParams, derived: DerivedChannel,
                            allocation: ResourceAllocation,
                            chi, iota, kind: str,
                            config: ConicConfig = ConicConfig(),
                            sca_point=None):
    """One shared uplink vector for all devices (uplink-adaptive or static).

    Maximizes the rate surrogate at fixed auxiliaries; for the static kind
    the energy-causality constraint is enforced through its linearization
    at ``sca_point``, plus the downlink amplifier budget.
    """
    if kind not in ("ul", "st"):
        raise ValueError(f"unknown shared kind {kind!r}")
    if kind == "st" and sca_point is None:
        raise ValueError("static kind requires an expansion point")
    n, k = params.num_elements, params.num_devices
    chi = np.asarray(chi, float)
    iota = np.asarray(iota, complex)
    if np.any(chi < 0):
        raise ValueError("chi must be nonnegative")
    p = allocation.p
    pf_finite = np.isfinite(params.p_f)

    if np.all(iota == 0):
        v = np.zeros(n, complex)
        if kind == "st":
            ok = allocation.f <= allocation.tau0 * params.eta * np.array(
                [sca_energy_bound(params, derived, i, v, sca_point) for i in range(k)]) + 1e-15
            if not np.all(ok):
                return None, ConvexSolveResult(INFEASIBLE, -np.inf, config.tol_gap_rel)
        obj = _shared_surrogate_value(params, derived, allocation, chi, iota, v)
        return v, ConvexSolveResult(OPTIMAL, obj, 0.0)

    ws = _shared_workspace(n, k, kind, pf_finite)
    par = ws["par"]
    am = params.a_max
    s_coef = np.sqrt(params.weights * allocation.tau * (1.0 + chi) * p)
    alpha = s_coef * iota
    avec = am * (np.conj(alpha)[:, None] * np.conj(derived.cascade)).sum(axis=0)
    # per-device channel scale: |z_k| <= c_z over the amplitude box
    cz = np.array([abs(derived.h_d[i]) + am * np.sum(np.abs(derived.cascade[i]))
                   for i in range(k)])
    cz = np.where(cz > 0, cz, 1.0)
    beta = np.abs(iota) ** 2 * p * cz ** 2
    wq1 = float(np.sum(np.abs(iota) ** 2)) * params.sigma_n2 * derived.g_abs2 * am ** 2
    # objective magnitude normalization (argmax-invariant)
    osc = 2.0 * np.sum(np.abs(avec)) + float(np.sum(beta)) + float(np.sum(wq1))
    osc = osc if osc > 0 else 1.0
    par["av_re"].value = avec.real / osc
    par["av_im"].value = avec.imag / osc
    par["beta"].value = beta / osc
    par["wq1"].value = wq1 / osc
    hdc = np.conj(derived.h_d) / cz
    par["hd_re"].value = hdc.real
    par["hd_im"].value = hdc.imag
    for i in range(k):
        bc = am * np.conj(derived.cascade[i]) / cz[i]
        par["bc_re"][i].value = bc.real
        par["bc_im"][i].value = bc.imag
        if pf_finite:
            par["dvec"][i].value = am ** 2 * (p[i] * derived.hr_abs2[i]
                                              + params.sigma_n2) / params.p_f
    if kind == "st":
        sp = _vecvals(sca_point)
        if pf_finite:
            par["bvec"].value = am ** 2 * (params.p_a * derived.g_abs2
                                           + params.sigma_n1) / params.p_f
        scale = allocation.tau0 * params.eta
        svecs = np.empty((k, n), complex)
        srhs = np.empty(k)
        for i in range(k):
            c, lvec = _sca_coefficients(params, derived, i, sp)
            svecs[i] = scale * am * lvec
            srhs[i] = allocation.f[i] - scale * c
        # per-row normalization keeps these rows at unit magnitude
        rsc = np.maximum(np.abs(srhs), 2.0 * np.linalg.norm(svecs, axis=1))
        rsc = np.where(rsc > 0, rsc, 1.0)
        for i in range(k):
            par["sv_re"][i].value = svecs[i].real / rsc[i]
            par["sv_im"][i].value = svecs[i].imag / rsc[i]
        par["srhs"].value = srhs / rsc

    prob = ws["prob"]
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(**config.solve_kwargs())
    except cp.error.SolverError:
        return None, ConvexSolveResult(MAX_ITERATIONS, -np.inf, config.tol_gap_rel)
    status = _status_of(prob)
    if ws["v"].value is None or status == INFEASIBLE:
        return None, ConvexSolveResult(status, -np.inf, config.tol_gap_rel)
    v = am * np.asarray(ws["v"].value, complex)
    # trim solver noise so downstream cap checks hold exactly
    amps = np.abs(v)
    over = amps > params.a_max
    if np.any(over):
        v[over] *= params.a_max / amps[over]
    obj = _shared_surrogate_value(params, derived, allocation, chi, iota, v)
    iters = prob.solver_stats.num_iters if prob.solver_stats else 0
    return v, ConvexSolveResult(status, obj, config.tol_gap_rel, iters)


def _shared_surrogate_value(params, derived, allocation, chi, iota, v) -> float:
    """Full surrogate including the terms constant in v.

    The chi/quadratic terms carry a log2(e) calibration so the surrogate
    lower-bounds the true weighted rate and matches it at the fixed point.
    """
    log2e = 1.0 / LN2
    total = 0.0
    for k in range(params.num_devices):
        w, tk, pk = params.weights[k], allocation.tau[k], allocation.p[k]
        z = effective_channel(derived, k, v)
        quad = np.real(np.vdot(v, derived.g_abs2 * v))
        den = pk * abs(z) ** 2 + params.sigma_n2 * quad + params.sigma_z2
        s = math.sqrt(max(w * tk * (1.0 + chi[k]) * pk, 0.0))
        u = 2.0 * np.real(np.conj(iota[k]) * s * z) - abs(iota[k]) ** 2 * den
        total += w * tk * math.log2(1.0 + chi[k]) + log2e * (-w * tk * chi[k] + u)
    return float(total)


# ---------------------------------------------------------------------------
# rank-one recovery


def gaussian_randomization(w0: np.ndarray, tau0: float, params: SystemParams,
                           derived: DerivedChannel, rng: np.random.Generator,
                           num_candidates: int = 500, allocation=None):
    """Recover a feasible downlink vector from the lifted solution.

    Candidates are drawn from CN(0, W0/tau0), normalized so the trailing
    coordinate is one, then scaled down to meet the downlink amplifier
    budget and the per-element caps.  The winner maximizes the worst
    per-device ratio of harvested-energy rate to the relaxation's rate.
    When an allocation is supplied, candidates that cannot support its
    transmit energies are rejected; if none survive the best candidate is
    carried in the raised error.
    """
    n, kd = params.num_elements, params.num_devices
    if tau0 <= 1e-12:
        return np.zeros(n, complex)
    v_mat = np.asarray(w0) / tau0
    v_mat = (v_mat + v_mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(v_mat)
    lead = float(vals[-1])
    if lead <= 0:
        return np.zeros(n, complex)

    ref = np.empty(kd)
    for k in range(kd):
        m = (params.p_a * derived.lifted_gram[k]
             + params.sigma_n1 * np.diag(derived.hr_abs2_lift[k]))
        ref[k] = params.eta * (float(np.real(np.trace(m @ v_mat))) - params.sigma_n1)
    ref = np.maximum(ref, 1e-300)

    principal = np.sqrt(lead) * vecs[:, -1]
    cands = []
    if abs(principal[n]) > 1e-12 * np.linalg.norm(principal):
        cands.append(principal[:n] / principal[n])
    rank_one = vals[-2] <= 1e-9 * lead if vals.size > 1 else True

    if not rank_one:
        root = vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0)))
        draws = rng.standard_normal((num_candidates, n + 1, 2))
        noise = (draws[..., 0] + 1j * draws[..., 1]) / np.sqrt(2.0)
        samples = noise @ root.T
        scale = samples[:, n].copy()
        tiny = np.abs(scale) < 1e-15
        scale[tiny] = 1.0
        cands.extend(samples[:, :n] / scale[:, None])
    if not cands:
        return np.zeros(n, complex)
    cand = np.stack(cands)

    # scale down to satisfy the downlink budget and per-element caps
    amp = np.abs(cand)
    s_cap = params.a_max / np.maximum(amp.max(axis=1), 1e-300)
    dl_pow = (params.p_a * (amp ** 2 @ derived.g_abs2)
              + params.sigma_n1 * np.sum(amp ** 2, axis=1))
    if np.isfinite(params.p_f):
        with np.errstate(divide="ignore"):
            s_pow = np.sqrt(params.p_f / np.maximum(dl_pow, 1e-300))
    else:
        s_pow = np.full(cand.shape[0], np.inf)
    cand *= np.minimum(1.0, np.minimum(s_cap, s_pow))[:, None]

    erate = np.empty((cand.shape[0], kd))
    for k in range(kd):
        z = np.conj(derived.h_d[k]) + cand @ np.conj(derived.cascade[k])
        erate[:, k] = params.eta * (params.p_a * np.abs(z) ** 2
                                    + params.sigma_n1 * (np.abs(cand) ** 2 @ derived.hr_abs2[k]))
    score = np.min(erate / ref[None, :], axis=1)

    if rank_one:
        return cand[0]
    if allocation is not None:
        f = np.asarray(allocation.f, float)
        ok = np.all(f[None, :] <= tau0 * erate * (1 + 1e-6) + 1e-18, axis=1)
        if not np.any(ok):
            best = int(np.argmax(score))
            raise RandomizationInfeasible(
                "no randomization candidate supports the current allocation",
                cand[best])
        score = np.where(ok, score, -np.inf)
    return cand[int(np.argmax(score))]
