"""Closed-form physical quantities and constraint checking.

Every function is a pure evaluation of the system model: harvested energy
during downlink energy transfer, uplink SINR and throughput, IRS amplifier
powers, total energy consumption, and the per-problem feasibility report.
"""

from dataclasses import dataclass, field

import numpy as np

from .derived import DerivedChannel, effective_channel
from .params import SystemParams

SETUPS = ("ue", "ul", "st")


def _vec(v) -> np.ndarray:
    """Accept a plain complex array or a ReflectionVector."""
    if isinstance(v, ReflectionVector):
        return v.values
    return np.asarray(v)


@dataclass(frozen=True)
class ReflectionVector:
    """One IRS coefficient vector with amplitude/phase accessors.

    Feasibility (amplitudes within the cap) is checked by
    ``check_feasibility``, not enforced on construction.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise ValueError("reflection vector must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("reflection vector has non-finite entries")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.values)

    @classmethod
    def zeros(cls, n: int) -> "ReflectionVector":
        return cls(np.zeros(n, dtype=complex))


@dataclass(frozen=True)
class ResourceAllocation:
    """Downlink duration, uplink durations, transmit powers and energies.

    ``f`` stores the substituted per-device transmit energies p_k * tau_k.
    """

    tau0: float
    tau: np.ndarray
    p: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        p = np.asarray(self.p, dtype=float)
        f = np.asarray(self.f, dtype=float)
        for name, arr in (("tau", tau), ("p", p), ("f", f)):
            object.__setattr__(self, name, arr)
        if self.tau0 < 0 or np.any(tau < 0) or np.any(p < 0) or np.any(f < 0):
            raise ValueError("allocation entries must be nonnegative")
        prod = p * tau
        scale = np.maximum(np.abs(f), np.abs(prod))
        bad = np.abs(f - prod) > 1e-9 * np.maximum(scale, 1e-300)
        if np.any(bad & (scale > 0)):
            raise ValueError("f_k must equal p_k * tau_k")

    @classmethod
    def from_tau_p(cls, tau0, tau, p):
        tau = np.asarray(tau, float)
        p = np.asarray(p, float)
        return cls(tau0=float(tau0), tau=tau, p=p, f=p * tau)

    @classmethod
    def from_tau_f(cls, tau0, tau, f):
        tau = np.asarray(tau, float)
        f = np.asarray(f, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(tau > 0, f / np.where(tau > 0, tau, 1.0), 0.0)
        return cls(tau0=float(tau0), tau=tau, p=p, f=np.where(tau > 0, f, 0.0))

    @property
    def total_time(self) -> float:
        return self.tau0 + float(np.sum(self.tau))


@dataclass(frozen=True)
class ReflectionPlan:
    """Reflection vectors for one beamforming setup.

    ``ul[k]`` is the vector active while device k transmits: per-device for
    the user-adaptive setup, one shared vector for uplink-adaptive, and the
    downlink vector itself for static.
    """

    kind: str
    v0: ReflectionVector
    ul: tuple

    def __post_init__(self):
        if self.kind not in SETUPS:
            raise ValueError(f"unknown setup {self.kind!r}")

    @classmethod
    def user_adaptive(cls, v0, vks) -> "ReflectionPlan":
        return cls("ue", _as_rv(v0), tuple(_as_rv(v) for v in vks))

    @classmethod
    def uplink_adaptive(cls, v0, v1, num_devices: int) -> "ReflectionPlan":
        shared = _as_rv(v1)
        return cls("ul", _as_rv(v0), (shared,) * num_devices)

    @classmethod
    def static(cls, v0, num_devices: int) -> "ReflectionPlan":
        v = _as_rv(v0)
        return cls("st", v, (v,) * num_devices)

    @property
    def num_devices(self) -> int:
        return len(self.ul)


def _as_rv(v) -> ReflectionVector:
    return v if isinstance(v, ReflectionVector) else ReflectionVector(np.asarray(v, complex))


# ---------------------------------------------------------------------------
# physical quantities


def harvested_energy_rate(params: SystemParams, derived: DerivedChannel,
                          k: int, v0) -> float:
    """Harvested energy per unit downlink time at device k."""
    v = _vec(v0)
    z = effective_channel(derived, k, v)
    noise_harvest = params.sigma_n1 * np.real(np.vdot(v, derived.hr_abs2[k] * v))
    return params.eta * (params.p_a * abs(z) ** 2 + noise_harvest)


def harvested_energy(params: SystemParams, derived: DerivedChannel,
                     k: int, v0, tau0: float) -> float:
    return tau0 * harvested_energy_rate(params, derived, k, v0)


def uplink_sinr(params: SystemParams, derived: DerivedChannel,
                k: int, v, p_k: float) -> float:
    if p_k < 0:
        raise ValueError("transmit power must be nonnegative")
    vv = _vec(v)
    den = params.sigma_n2 * np.real(np.vdot(vv, derived.g_abs2 * vv)) + params.sigma_z2
    if den <= 0:
        raise ZeroDivisionError("uplink noise power is zero")
    return p_k * abs(effective_channel(derived, k, vv)) ** 2 / den


def unit_power_sinr(params: SystemParams, derived: DerivedChannel, k: int, v) -> float:
    """SINR per Watt of transmit power; multiplies f_k/tau_k in the solvers."""
    return uplink_sinr(params, derived, k, v, 1.0)


def throughput(params: SystemParams, derived: DerivedChannel,
               k: int, tau_k: float, p_k: float, v) -> float:
    """tau_k * log2(1 + SINR), extended continuously to 0 at tau_k = 0."""
    if tau_k < 0:
        raise ValueError("tau_k must be nonnegative")
    if tau_k == 0:
        return 0.0
    return tau_k * np.log2(1.0 + uplink_sinr(params, derived, k, v, p_k))


def weighted_sum_throughput(params: SystemParams, derived: DerivedChannel,
                            allocation: ResourceAllocation,
                            plan: ReflectionPlan) -> float:
    if plan.num_devices != params.num_devices:
        raise ValueError("reflection plan does not match the device count")
    return float(sum(
        params.weights[k] * throughput(params, derived, k,
                                       allocation.tau[k], allocation.p[k], plan.ul[k])
        for k in range(params.num_devices)))


def dl_amplify_power(params: SystemParams, derived: DerivedChannel, v0) -> float:
    """IRS output power while reflecting the downlink energy signal."""
    v = _vec(v0)
    return (params.p_a * np.real(np.vdot(v, derived.g_abs2 * v))
            + params.sigma_n1 * np.real(np.vdot(v, v)))


def ul_amplify_power(params: SystemParams, derived: DerivedChannel,
                     k: int, v, p_k: float) -> float:
    """IRS output power while device k transmits with power p_k."""
    vv = _vec(v)
    return (p_k * np.real(np.vdot(vv, derived.hr_abs2[k] * vv))
            + params.sigma_n2 * np.real(np.vdot(vv, vv)))


def total_energy_consumption(params: SystemParams, derived: DerivedChannel,
                             allocation: ResourceAllocation, plan: ReflectionPlan,
                             mode: str) -> float:
    """HAP transmit energy plus, in active mode, all IRS amplifier energies."""
    if mode == "passive":
        return params.p_a * allocation.tau0
    if mode != "active":
        raise ValueError(f"unknown mode {mode!r}")
    total = allocation.tau0 * params.p_a
    total += allocation.tau0 * dl_amplify_power(params, derived, plan.v0)
    for k in range(params.num_devices):
        total += allocation.tau[k] * ul_amplify_power(params, derived, k,
                                                      plan.ul[k], allocation.p[k])
    return total


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class FeasibilityReport:
    """Signed slacks for every constraint family; >= -tolerance is feasible."""

    energy_slack: np.ndarray        # harvested minus spent, per device
    dl_power_slack: float           # amplifying budget, downlink vector
    ul_power_slack: np.ndarray      # amplifying budget per device transmission
    time_slack: float
    nonneg_slack: float
    amplitude_slack_dl: float
    amplitude_slack_ul: np.ndarray
    tolerance: float
    feasible: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "feasible", bool(self.worst >= -self.tolerance))

    @property
    def worst(self) -> float:
        return float(min(
            np.min(self.energy_slack), self.dl_power_slack,
            np.min(self.ul_power_slack), self.time_slack, self.nonneg_slack,
            self.amplitude_slack_dl, np.min(self.amplitude_slack_ul)))


def check_feasibility(kind: str, params: SystemParams, derived: DerivedChannel,
                      allocation: ResourceAllocation, plan: ReflectionPlan,
                      tolerance: float = 1e-6) -> FeasibilityReport:
    """Evaluate every constraint of the given problem setup.

    The ``ue`` kind checks each device's own uplink vector, ``ul`` checks a
    shared uplink vector against every device, and ``st`` checks the single
    downlink vector against both the downlink and every uplink budget.
    """
    if kind not in SETUPS:
        raise ValueError(f"unknown problem kind {kind!r}")
    if plan.kind != kind:
        raise ValueError(f"plan is for setup {plan.kind!r}, not {kind!r}")
    k_n = params.num_devices
    if plan.num_devices != k_n or allocation.tau.shape != (k_n,):
        raise ValueError("mismatched device count between setup and vectors")

    energy = np.array([
        harvested_energy(params, derived, k, plan.v0, allocation.tau0)
        - allocation.p[k] * allocation.tau[k] for k in range(k_n)])
    dl_power = params.p_f - dl_amplify_power(params, derived, plan.v0)
    ul_power = np.array([
        params.p_f - ul_amplify_power(params, derived, k, plan.ul[k], allocation.p[k])
        for k in range(k_n)])
    time_slack = params.t_max - allocation.total_time
    nonneg = float(min(allocation.tau0, np.min(allocation.tau), np.min(allocation.p)))
    amp_dl = params.a_max - float(np.max(plan.v0.amplitudes)) if plan.v0.values.size else 0.0
    amp_ul = np.array([params.a_max - float(np.max(plan.ul[k].amplitudes))
                       for k in range(k_n)])
    return FeasibilityReport(
        energy_slack=energy, dl_power_slack=float(dl_power), ul_power_slack=ul_power,
        time_slack=float(time_slack), nonneg_slack=nonneg,
        amplitude_slack_dl=float(amp_dl), amplitude_slack_ul=amp_ul,
        tolerance=tolerance)
