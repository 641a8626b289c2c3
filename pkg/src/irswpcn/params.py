"""System-level scalar constants shared by every formula and solver."""

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SystemParams:
    """Physical constants and objective weights.

    Powers in Watts, times in seconds, amplitudes linear.  ``p_f`` may be
    ``inf`` to disable the amplifying-power budgets (passive baseline).
    ``sigma_z1`` (downlink receiver noise) is carried for completeness but
    enters no formula: harvested energy ignores receiver noise.
    """

    p_a: float                      # HAP transmit power
    p_f: float                      # IRS amplifying power budget
    sigma_n1: float                 # IRS thermal noise, downlink
    sigma_n2: float                 # IRS thermal noise, uplink
    sigma_z1: float                 # receiver noise, downlink (inert)
    sigma_z2: float                 # receiver noise, uplink
    eta: float                      # energy conversion efficiency
    t_max: float                    # total frame duration
    a_max: float                    # per-element amplitude cap (linear)
    weights: np.ndarray             # per-device throughput weights, length K
    num_elements: int               # N
    num_devices: int                # K

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if self.num_devices < 1 or self.num_elements < 1:
            raise ValueError("need at least one device and one element")
        if w.shape != (self.num_devices,):
            raise ValueError(f"weights shape {w.shape} != ({self.num_devices},)")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        for name in ("p_a", "p_f", "sigma_n1", "sigma_n2", "sigma_z1", "sigma_z2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.t_max <= 0 or self.a_max <= 0:
            raise ValueError("t_max and a_max must be positive")

    def with_passive_irs(self) -> "SystemParams":
        """Passive-IRS variant: unit amplitude cap, no amplifier noise,
        amplifying power budget removed."""
        return replace(self, a_max=1.0, sigma_n1=0.0, sigma_n2=0.0, p_f=np.inf)


def default_params(num_elements: int = 10, num_devices: int = 4,
                   p_a_dbm: float = 20.0, p_f_dbm: float = 5.0,
                   noise_dbm: float = -90.0, eta: float = 0.8,
                   t_max: float = 1.0, a_max_db: float = 25.0,
                   weights=None) -> SystemParams:
    """Simulation defaults used throughout the experiments."""
    from .units import dbm_to_watts, db_to_linear_amplitude

    if weights is None:
        weights = np.ones(num_devices)
    noise = dbm_to_watts(noise_dbm)
    return SystemParams(
        p_a=dbm_to_watts(p_a_dbm),
        p_f=dbm_to_watts(p_f_dbm),
        sigma_n1=noise, sigma_n2=noise, sigma_z1=noise, sigma_z2=noise,
        eta=eta, t_max=t_max,
        a_max=db_to_linear_amplitude(a_max_db),
        weights=np.asarray(weights, dtype=float),
        num_elements=num_elements, num_devices=num_devices,
    )
