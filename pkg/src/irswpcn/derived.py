"""Channel-derived quantities cached for the solvers.

For a reflection vector v the relevant physical forms are the combined
channel h_d,k^H + b_k^H v of each device, the per-element incident powers
on the HAP side (|g_n|^2) and device side (|h_{r,k,n}|^2), and the lifted
rank-one outer products used by the semidefinite relaxation.
"""

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization


@dataclass(frozen=True)
class DerivedChannel:
    g: np.ndarray             # (N,)   HAP -> IRS
    h_d: np.ndarray           # (K,)   HAP -> device
    cascade: np.ndarray       # (K, N) b_k with b_k^H v = sum_n conj(b_kn) v_n
    g_abs2: np.ndarray        # (N,)   per-element HAP-side power
    hr_abs2: np.ndarray       # (K, N) per-element device-side power
    g_abs2_lift: np.ndarray   # (N+1,) with trailing 1
    hr_abs2_lift: np.ndarray  # (K, N+1) with trailing 1
    lifted: np.ndarray        # (K, N+1) [b_k; h_d,k]
    lifted_gram: np.ndarray   # (K, N+1, N+1) rank-one Hermitian outer products

    @property
    def num_elements(self) -> int:
        return self.g.shape[0]

    @property
    def num_devices(self) -> int:
        return self.h_d.shape[0]


def derive_channel(realization: ChannelRealization) -> DerivedChannel:
    g, h_r, h_d = realization.g, realization.h_r, realization.h_d
    k, n = h_r.shape
    cascade = np.conj(g)[None, :] * h_r
    g_abs2 = np.abs(g) ** 2
    hr_abs2 = np.abs(h_r) ** 2
    lifted = np.concatenate([cascade, h_d[:, None]], axis=1)
    gram = np.einsum("ki,kj->kij", lifted, np.conj(lifted))
    return DerivedChannel(
        g=g.copy(), h_d=h_d.copy(), cascade=cascade,
        g_abs2=g_abs2, hr_abs2=hr_abs2,
        g_abs2_lift=np.concatenate([g_abs2, [1.0]]),
        hr_abs2_lift=np.concatenate([hr_abs2, np.ones((k, 1))], axis=1),
        lifted=lifted, lifted_gram=gram)


def effective_channel(derived: DerivedChannel, k: int, v: np.ndarray) -> complex:
    """Combined uplink/downlink coefficient h_d,k^H + b_k^H v."""
    return np.conj(derived.h_d[k]) + np.vdot(derived.cascade[k], v)
