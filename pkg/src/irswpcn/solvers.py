"""Alternating-optimization drivers for the three beamforming setups.

Each driver alternates a time/power allocation solve with fractional-
programming updates of the reflection vectors, keeps the best iterate so
the objective trace never decreases, and ends with a feasible solution.
The user- and uplink-adaptive setups carry the downlink reflection in
lifted form during the iterations and extract a rank-one vector once at
the end; the static setup optimizes its single vector directly with a
linearized energy-causality constraint.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import convex
from .channels import ChannelRealization
from .convex import (ConicConfig, RandomizationInfeasible,
                     SolverFailure, gaussian_randomization,
                     solve_device_reflection, solve_shared_reflection,
                     solve_time_power_convex, solve_time_power_sdp)
from .derived import DerivedChannel, derive_channel, effective_channel
from .model import (FeasibilityReport, ReflectionPlan, ResourceAllocation,
                    check_feasibility, dl_amplify_power, unit_power_sinr,
                    uplink_sinr, weighted_sum_throughput)
from .params import SystemParams


@dataclass(frozen=True)
class FPState:
    """Auxiliaries of the fractional-programming reformulation."""

    chi: np.ndarray          # nonnegative SINR auxiliaries
    iota: np.ndarray         # complex quadratic-transform auxiliaries

    def __post_init__(self):
        if np.any(np.asarray(self.chi) < 0) or not np.all(np.isfinite(self.chi)):
            raise ValueError("chi must be finite and nonnegative")
        if not np.all(np.isfinite(self.iota)):
            raise ValueError("iota must be finite")


@dataclass(frozen=True)
class SolverConfig:
    ao_rel_tolerance: float = 1e-4
    ao_max_iterations: int = 50
    fp_rel_tolerance: float = 1e-5
    fp_max_iterations: int = 30
    randomization_count: int = 500
    init_strategy: str = "cophased"
    conic: ConicConfig = field(default_factory=ConicConfig)

    def __post_init__(self):
        if self.ao_rel_tolerance <= 0 or self.fp_rel_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.ao_max_iterations < 1 or self.fp_max_iterations < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass(frozen=True)
class Solution:
    setup: str
    allocation: ResourceAllocation
    plan: ReflectionPlan
    objective: float                  # weighted sum throughput, bits/Hz
    objective_trace: list
    fp_traces: list
    feasibility: FeasibilityReport
    iterations_used: int
    wall_time: float
    status: str = "converged"


# ---------------------------------------------------------------------------
# fractional-programming updates


def update_iota_sinr(params: SystemParams, derived: DerivedChannel,
                     k: int, v) -> complex:
    """Auxiliary for the per-device SINR objective (quadratic transform)."""
    vv = _vals(v)
    den = params.sigma_n2 * float(np.real(np.vdot(vv, derived.g_abs2 * vv))) + params.sigma_z2
    if den <= 0:
        raise ZeroDivisionError("SINR denominator is zero")
    return complex(effective_channel(derived, k, vv) / den)


def update_chi(params: SystemParams, derived: DerivedChannel,
               k: int, p_k: float, v) -> float:
    """SINR auxiliary; equals the uplink SINR at the current point."""
    return uplink_sinr(params, derived, k, v, p_k)


def update_iota_rate(params: SystemParams, derived: DerivedChannel, k: int,
                     weight: float, tau_k: float, p_k: float,
                     chi_k: float, v) -> complex:
    """Auxiliary for the weighted-rate surrogate of one device."""
    vv = _vals(v)
    z = effective_channel(derived, k, vv)
    den = (p_k * abs(z) ** 2
           + params.sigma_n2 * float(np.real(np.vdot(vv, derived.g_abs2 * vv)))
           + params.sigma_z2)
    if den <= 0:
        raise ZeroDivisionError("rate-surrogate denominator is zero")
    return complex(np.sqrt(weight * tau_k * (1.0 + chi_k) * p_k) * z / den)


def _vals(v):
    return v.values if hasattr(v, "values") else np.asarray(v)


# ---------------------------------------------------------------------------
# initialization and closed forms


def cophased_vector(params: SystemParams, derived: DerivedChannel,
                    align_k: int) -> np.ndarray:
    """Feasible start: phases align every cascaded term with the direct
    link of the given device; uniform amplitude at 90% of the downlink
    amplifier budget, capped per element."""
    phases = np.angle(np.conj(derived.h_d[align_k])) - np.angle(np.conj(derived.cascade[align_k]))
    denom = params.p_a * float(np.sum(derived.g_abs2)) + params.sigma_n1 * params.num_elements
    if np.isfinite(params.p_f) and denom > 0:
        amp = min(params.a_max, 0.9 * np.sqrt(params.p_f / denom))
    else:
        amp = params.a_max
    return amp * np.exp(1j * phases)


def closed_form_single_device_amplitudes(params: SystemParams,
                                         derived: DerivedChannel,
                                         phase: str, p: float | None = None):
    """Single-device amplitude law that exhausts the amplifier budget with
    equal per-element cascaded gain, clipped at the cap, plus the
    co-phasing rule. ``phase`` selects the downlink or uplink budget; the
    uplink form needs the device transmit power."""
    if params.num_devices != 1:
        raise ValueError("closed form applies to the single-device case")
    if not np.isfinite(params.p_f):
        raise ValueError("closed form needs a finite amplifying budget")
    g_abs2 = derived.g_abs2
    hr_abs2 = derived.hr_abs2[0]
    if np.any(g_abs2 == 0) or np.any(hr_abs2 == 0):
        raise ValueError("closed form undefined for zero channel elements")
    if phase == "dl":
        denom = np.sum(params.p_a / hr_abs2 + params.sigma_n1 / (g_abs2 * hr_abs2))
    elif phase == "ul":
        if p is None or p < 0:
            raise ValueError("uplink form needs a nonnegative transmit power")
        denom = np.sum(p / g_abs2 + params.sigma_n2 / (g_abs2 * hr_abs2))
    else:
        raise ValueError(f"unknown phase {phase!r}")
    c = np.sqrt(params.p_f / denom)
    amplitudes = np.minimum(c / np.sqrt(g_abs2 * hr_abs2), params.a_max)
    phases = np.angle(np.conj(derived.h_d[0])) - np.angle(np.conj(derived.cascade[0]))
    return amplitudes, phases


# ---------------------------------------------------------------------------
# driver helpers


def _as_derived(channels) -> DerivedChannel:
    if isinstance(channels, ChannelRealization):
        return derive_channel(channels)
    return channels


def _gammas(params, derived, vectors) -> np.ndarray:
    return np.array([unit_power_sinr(params, derived, k, vectors[k])
                     for k in range(params.num_devices)])


def _relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(old), 1e-12)


def _extract_v0(params, derived, lift, alloc, config, rng):
    """Rank-one downlink vector from the lifted iterate, tolerating
    candidates that need an allocation re-solve."""
    try:
        v0 = gaussian_randomization(lift.w0, lift.tau0, params, derived, rng,
                                    num_candidates=config.randomization_count,
                                    allocation=alloc)
        return v0, "converged"
    except RandomizationInfeasible as exc:
        return exc.candidate, "randomization-repair"


def _extract_and_resolve(params, derived, lift, alloc, gammas, ul_vectors,
                         config, rng):
    """Final downlink vector and allocation.

    The randomization winner competes with the co-phased structured
    candidates; each is judged by the true objective after re-solving the
    allocation around it, which bounds the rank-one extraction loss.
    """
    v0, status = _extract_v0(params, derived, lift, alloc, config, rng)
    candidates = [v0] + [cophased_vector(params, derived, k)
                         for k in range(params.num_devices)]
    best = (v0, alloc, -np.inf)
    for cand in candidates:
        alloc_c, res = solve_time_power_convex(params, derived, gammas, cand,
                                               config.conic,
                                               ul_vectors=ul_vectors)
        if alloc_c is None:
            continue
        if res.objective > best[2]:
            best = (cand, alloc_c, res.objective)
    return best[0], best[1], status


def _finalize(params, derived, setup, alloc, plan, trace, fp_traces,
              iterations, started, status) -> Solution:
    objective = weighted_sum_throughput(params, derived, alloc, plan)
    report = check_feasibility(setup, params, derived, alloc, plan)
    return Solution(setup=setup, allocation=alloc, plan=plan,
                    objective=float(objective), objective_trace=trace,
                    fp_traces=fp_traces, feasibility=report,
                    iterations_used=iterations,
                    wall_time=time.perf_counter() - started, status=status)


# ---------------------------------------------------------------------------
# user-adaptive setup


def solve_user_adaptive(params: SystemParams, channels,
                        config: SolverConfig = SolverConfig(),
                        rng: np.random.Generator | None = None) -> Solution:
    """Per-device uplink reflections plus a dedicated downlink reflection."""
    started = time.perf_counter()
    derived = _as_derived(channels)
    rng = rng if rng is not None else np.random.default_rng(0)
    kd = params.num_devices

    vks = [cophased_vector(params, derived, k) for k in range(kd)]
    gammas = _gammas(params, derived, vks)
    alloc = lift = None
    current = -np.inf
    trace, fp_traces = [], []
    status = "converged"

    iterations = 0
    for it in range(config.ao_max_iterations):
        iterations = it + 1
        cand_alloc, cand_lift, res = solve_time_power_sdp(
            params, derived, gammas, vks, config.conic)
        if cand_alloc is None:
            if it == 0:
                raise SolverFailure(f"allocation subproblem failed: {res.status}")
            status = "converged-early"
            break
        if res.objective >= current:       # keep the better iterate
            alloc, lift, current = cand_alloc, cand_lift, res.objective

        fp_trace = []
        for k in range(kd):
            vks[k], gammas[k], gtrace = _device_fp(params, derived, k,
                                                   alloc.p[k], vks[k], config)
            fp_trace.append(gtrace)
        fp_traces.append(fp_trace)

        current = convex._rate_value(params.weights, alloc.tau, gammas, alloc.f)
        trace.append(current)
        if it > 0 and _relative_change(trace[-1], trace[-2]) < config.ao_rel_tolerance:
            break

    v0, final_alloc, status2 = _extract_and_resolve(
        params, derived, lift, alloc, gammas, vks, config, rng)
    if status == "converged":
        status = status2
    if final_alloc is not None:
        alloc = final_alloc
    plan = ReflectionPlan.user_adaptive(v0, vks)
    return _finalize(params, derived, "ue", alloc, plan, trace, fp_traces,
                     iterations, started, status)


def _device_fp(params, derived, k, p_k, v, config):
    """Quadratic-transform ascent on one device's SINR."""
    gamma = unit_power_sinr(params, derived, k, v)
    gtrace = [gamma]
    for _ in range(config.fp_max_iterations):
        iota = update_iota_sinr(params, derived, k, v)
        v_new, _ = solve_device_reflection(params, derived, k, p_k, iota)
        gamma_new = unit_power_sinr(params, derived, k, v_new)
        if gamma_new < gamma:
            break
        v, improved, gamma = v_new, gamma_new - gamma, gamma_new
        gtrace.append(gamma)
        if improved <= config.fp_rel_tolerance * max(gamma, 1e-30):
            break
    return v, gamma, gtrace


# ---------------------------------------------------------------------------
# uplink-adaptive setup


def solve_uplink_adaptive(params: SystemParams, channels,
                          config: SolverConfig = SolverConfig(),
                          rng: np.random.Generator | None = None) -> Solution:
    """One shared uplink reflection plus a dedicated downlink reflection."""
    started = time.perf_counter()
    derived = _as_derived(channels)
    rng = rng if rng is not None else np.random.default_rng(0)
    kd = params.num_devices

    v1 = _best_shared_start(params, derived, config)
    gammas = _gammas(params, derived, [v1] * kd)
    alloc = lift = None
    current = -np.inf
    trace, fp_traces = [], []
    status = "converged"

    iterations = 0
    for it in range(config.ao_max_iterations):
        iterations = it + 1
        cand_alloc, cand_lift, res = solve_time_power_sdp(
            params, derived, gammas, [v1] * kd, config.conic)
        if cand_alloc is None:
            if it == 0:
                raise SolverFailure(f"allocation subproblem failed: {res.status}")
            status = "converged-early"
            break
        if res.objective >= current:
            alloc, lift, current = cand_alloc, cand_lift, res.objective

        v1, wst_trace = _shared_fp(params, derived, alloc, v1, "ul", config)
        fp_traces.append(wst_trace)
        gammas = _gammas(params, derived, [v1] * kd)
        current = convex._rate_value(params.weights, alloc.tau, gammas, alloc.f)

        v1, alloc, lift, gammas, current = _ul_joint_trial(
            params, derived, alloc, lift, v1, gammas, current, config)
        trace.append(current)
        if it > 0 and _relative_change(trace[-1], trace[-2]) < config.ao_rel_tolerance:
            break

    v0, final_alloc, status2 = _extract_and_resolve(
        params, derived, lift, alloc, gammas, [v1] * kd, config, rng)
    if status == "converged":
        status = status2
    if final_alloc is not None:
        alloc = final_alloc
    plan = ReflectionPlan.uplink_adaptive(v0, v1, kd)
    return _finalize(params, derived, "ul", alloc, plan, trace, fp_traces,
                     iterations, started, status)


def _project_shared(params, derived, alloc, v, kind, check_causality=True):
    """Scale a candidate shared vector back inside the amplifier budgets and
    caps; for the static kind additionally require true energy causality
    unless the caller re-solves the allocation afterwards.  Returns None
    when the candidate cannot be used."""
    amp = np.abs(v)
    peak = float(np.max(amp)) if amp.size else 0.0
    s = 1.0 if peak <= params.a_max else params.a_max / peak
    if np.isfinite(params.p_f):
        from .model import ul_amplify_power
        for k in range(params.num_devices):
            pw = ul_amplify_power(params, derived, k, v, alloc.p[k])
            if pw > 0:
                s = min(s, np.sqrt(params.p_f / pw))
        if kind == "st":
            pw = dl_amplify_power(params, derived, v)
            if pw > 0:
                s = min(s, np.sqrt(params.p_f / pw))
    cand = s * v
    if kind == "st" and check_causality:
        from .model import harvested_energy_rate
        for k in range(params.num_devices):
            if alloc.f[k] > alloc.tau0 * harvested_energy_rate(params, derived, k, cand):
                return None
    return cand


def _best_shared_start(params, derived, config):
    """Shared-vector start: best of the per-device co-phased candidates,
    scored by the lifted allocation solve (basin selection)."""
    kd = params.num_devices
    if kd == 1:
        return cophased_vector(params, derived, 0)
    best_v, best_obj = None, -np.inf
    order = sorted(range(kd), key=lambda k: -params.weights[k])
    for k in order:
        v = cophased_vector(params, derived, k)
        gammas = _gammas(params, derived, [v] * kd)
        _, _, res = solve_time_power_sdp(params, derived, gammas, [v] * kd,
                                         config.conic)
        if res.objective > best_obj:
            best_v, best_obj = v, res.objective
    return best_v if best_v is not None else cophased_vector(params, derived, 0)


def _ul_joint_trial(params, derived, alloc, lift, v1, gammas, current, config):
    """Probe a joint (shared vector, allocation) move for the uplink setup.

    The shared vector can be pinned by the per-device amplifier rows at the
    current powers; a caps-only reflection step followed by a fresh lifted
    allocation solve escapes that, and is accepted only on improvement of
    the traced (relaxed) objective.
    """
    kd = params.num_devices
    chi = np.array([update_chi(params, derived, k, alloc.p[k], v1)
                    for k in range(kd)])
    iota = np.array([update_iota_rate(params, derived, k, params.weights[k],
                                      alloc.tau[k], alloc.p[k], chi[k], v1)
                     for k in range(kd)])
    free_params = replace(params, p_f=np.inf)
    v_free, _ = solve_shared_reflection(free_params, derived, alloc, chi, iota,
                                        "ul", config.conic)
    if v_free is None:
        return v1, alloc, lift, gammas, current
    for t in (1.0, 0.5, 0.25):
        cand = (1.0 - t) * v1 + t * v_free    # caps are convex, no projection
        g_c = _gammas(params, derived, [cand] * kd)
        alloc_c, lift_c, res_c = solve_time_power_sdp(params, derived, g_c,
                                                      [cand] * kd, config.conic)
        if alloc_c is None:
            continue
        if res_c.objective > current:
            return cand, alloc_c, lift_c, g_c, res_c.objective
    return v1, alloc, lift, gammas, current


def _shared_fp(params, derived, alloc, v, kind, config):
    """Fractional-programming ascent of the weighted rate over one shared
    vector at a fixed allocation.  For the static kind each pass refreshes
    the linearization of the energy-causality constraint at the iterate.
    Accepted steps are over-relaxed while the true objective keeps
    improving, which counters the small steps the quadratic transform
    takes at high SINR."""
    kd = params.num_devices
    plan_of = (lambda vv: ReflectionPlan.static(vv, kd)) if kind == "st" \
        else (lambda vv: ReflectionPlan.uplink_adaptive(vv, vv, kd))
    wst = weighted_sum_throughput(params, derived, alloc, plan_of(v))
    wtrace = [wst]
    for _ in range(config.fp_max_iterations):
        chi = np.array([update_chi(params, derived, k, alloc.p[k], v)
                        for k in range(kd)])
        iota = np.array([update_iota_rate(params, derived, k, params.weights[k],
                                          alloc.tau[k], alloc.p[k], chi[k], v)
                         for k in range(kd)])
        v_new, res = solve_shared_reflection(
            params, derived, alloc, chi, iota, kind, config.conic,
            sca_point=v if kind == "st" else None)
        if v_new is None:
            break                       # keep the current (feasible) iterate
        wst_new = weighted_sum_throughput(params, derived, alloc, plan_of(v_new))
        if wst_new < wst:
            break
        step = v_new - v
        theta = 2.0
        while theta <= 256.0:
            cand = _project_shared(params, derived, alloc, v + theta * step, kind)
            if cand is None:
                break
            wst_cand = weighted_sum_throughput(params, derived, alloc, plan_of(cand))
            if wst_cand <= wst_new:
                break
            v_new, wst_new = cand, wst_cand
            theta *= 2.0
        v, improved, wst = v_new, wst_new - wst, wst_new
        wtrace.append(wst)
        if improved <= config.fp_rel_tolerance * max(wst, 1e-30):
            break
    return v, wtrace


# ---------------------------------------------------------------------------
# static setup


def solve_static(params: SystemParams, channels,
                 config: SolverConfig = SolverConfig(),
                 rng: np.random.Generator | None = None) -> Solution:
    """A single reflection vector serving both link directions.

    Block alternation alone can pin the vector where energy causality binds
    for every device, so each iteration also probes a joint move: a
    rate-oriented reflection step with the causality rows dropped, made
    consistent again by re-solving the allocation, accepted only when the
    true objective improves.
    """
    started = time.perf_counter()
    derived = _as_derived(channels)
    kd = params.num_devices

    v0, alloc, current = _best_cophased_start(params, derived, config)
    if alloc is None:
        raise SolverFailure("allocation subproblem failed at initialization")
    trace, fp_traces = [], []
    status = "converged"

    iterations = 0
    for it in range(config.ao_max_iterations):
        iterations = it + 1
        gammas = _gammas(params, derived, [v0] * kd)
        cand_alloc, res = solve_time_power_convex(params, derived, gammas, v0,
                                                  config.conic)
        if cand_alloc is None:
            status = "converged-early"
            break
        if res.objective >= current:
            alloc, current = cand_alloc, res.objective

        v0, wst_trace = _shared_fp(params, derived, alloc, v0, "st", config)
        fp_traces.append(wst_trace)
        current = weighted_sum_throughput(params, derived, alloc,
                                          ReflectionPlan.static(v0, kd))

        v0, alloc, current = _static_joint_trial(params, derived, alloc, v0,
                                                 current, config)
        trace.append(current)
        if it > 0 and _relative_change(trace[-1], trace[-2]) < config.ao_rel_tolerance:
            break

    plan = ReflectionPlan.static(v0, kd)
    return _finalize(params, derived, "st", alloc, plan, trace, fp_traces,
                     iterations, started, status)


def _best_cophased_start(params, derived, config):
    """Try one co-phased start per device and keep the best allocation."""
    kd = params.num_devices
    best = (None, None, -np.inf)
    order = sorted(range(kd), key=lambda k: -params.weights[k])
    for k in order:
        v = cophased_vector(params, derived, k)
        gammas = _gammas(params, derived, [v] * kd)
        alloc, res = solve_time_power_convex(params, derived, gammas, v,
                                             config.conic)
        if alloc is not None and res.objective > best[2]:
            best = (v, alloc, res.objective)
    return best


def _static_joint_trial(params, derived, alloc, v0, current, config):
    """Probe a joint (reflection, allocation) move past binding causality."""
    kd = params.num_devices
    chi = np.array([update_chi(params, derived, k, alloc.p[k], v0)
                    for k in range(kd)])
    iota = np.array([update_iota_rate(params, derived, k, params.weights[k],
                                      alloc.tau[k], alloc.p[k], chi[k], v0)
                     for k in range(kd)])
    v_free, res = solve_shared_reflection(params, derived, alloc, chi, iota,
                                          "ul", config.conic)
    if v_free is None:
        return v0, alloc, current
    for t in (1.0, 0.5, 0.25):
        cand = _project_shared(params, derived, alloc,
                               (1.0 - t) * v0 + t * v_free, "st",
                               check_causality=False)
        if cand is None:
            continue
        gammas = _gammas(params, derived, [cand] * kd)
        alloc_c, res_c = solve_time_power_convex(params, derived, gammas, cand,
                                                 config.conic)
        if alloc_c is None:
            continue
        wst = weighted_sum_throughput(params, derived, alloc_c,
                                      ReflectionPlan.static(cand, kd))
        if wst > current:
            return cand, alloc_c, wst
    return v0, alloc, current


# ---------------------------------------------------------------------------
# passive baseline and dispatch


def solve_passive_baseline(params: SystemParams, channels,
                           config: SolverConfig = SolverConfig(),
                           rng: np.random.Generator | None = None,
                           setup: str = "ue") -> Solution:
    """Passive-IRS comparison run: unit amplitude cap, no amplifier noise,
    amplifying budgets removed. Energy accounting uses the passive mode."""
    passive = params.with_passive_irs()
    if setup == "ue":
        return solve_user_adaptive(passive, channels, config, rng)
    if setup == "ul":
        return solve_uplink_adaptive(passive, channels, config, rng)
    if setup in ("st", "static"):
        return solve_static(passive, channels, config, rng)
    raise ValueError(f"unknown passive setup {setup!r}")


SCHEMES = {
    "ue_active": ("active", "ue"),
    "ul_active": ("active", "ul"),
    "static_active": ("active", "st"),
    "ue_passive": ("passive", "ue"),
    "static_passive": ("passive", "st"),
}


def solve_scheme(scheme: str, params: SystemParams, channels,
                 config: SolverConfig = SolverConfig(),
                 rng: np.random.Generator | None = None) -> Solution:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    mode, setup = SCHEMES[scheme]
    if mode == "passive":
        return solve_passive_baseline(params, channels, config, rng, setup=setup)
    if setup == "ue":
        return solve_user_adaptive(params, channels, config, rng)
    if setup == "ul":
        return solve_uplink_adaptive(params, channels, config, rng)
    return solve_static(params, channels, config, rng)
