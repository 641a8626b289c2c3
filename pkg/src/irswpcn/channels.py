"""Statistical channel model: distance path loss, Rayleigh direct links,
Rician IRS links with a geometry-derived line-of-sight component."""

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryConfig, NodePositions, place_nodes
from .units import db_to_linear_power

# Stream codes keep every random draw in its own named stream per
# realization, so parameter sweeps reuse identical fading.
_STREAMS = {"placement": 0, "direct": 1, "hap_irs": 2, "irs_device": 3, "solver": 4}


def named_rng(master_seed: int, realization: int, stream: str) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed,
                                 spawn_key=(realization, _STREAMS[stream]))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class FadingConfig:
    pathloss_exponent_irs: float = 2.2      # HAP-IRS and IRS-device links
    pathloss_exponent_direct: float = 3.5   # HAP-device links
    rician_factor: float = 10.0             # linear; inf = pure LoS
    reference_gain_db: float = -30.0        # at reference_distance
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.pathloss_exponent_irs < 0 or self.pathloss_exponent_direct < 0:
            raise ValueError("path loss exponents must be >= 0")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be > 0")


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray      # (N,)  HAP -> IRS
    h_r: np.ndarray    # (K, N) IRS -> device k
    h_d: np.ndarray    # (K,)  HAP -> device k

    def __post_init__(self):
        for name in ("g", "h_r", "h_d"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"channel {name} has non-finite entries")

    @property
    def num_elements(self) -> int:
        return self.g.shape[0]

    @property
    def num_devices(self) -> int:
        return self.h_d.shape[0]


def path_loss(distance: float, fading: FadingConfig, exponent: float) -> float:
    """Linear power gain at the given distance."""
    if distance < fading.reference_distance:
        raise ValueError(
            f"distance {distance} m below reference {fading.reference_distance} m; "
            "path loss model invalid")
    ref = db_to_linear_power(fading.reference_gain_db)
    return ref * (distance / fading.reference_distance) ** (-exponent)


def _steering(n_elements: int, origin: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA response along the x-axis for the link direction."""
    delta = target - origin
    cos_angle = delta[0] / np.linalg.norm(delta)
    n = np.arange(n_elements)
    return np.exp(-1j * np.pi * n * cos_angle)


def _rician(rng: np.random.Generator, los: np.ndarray, factor: float) -> np.ndarray:
    """Unit-power small-scale fading around the given LoS response."""
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    if np.isinf(factor):
        return los
    return np.sqrt(factor / (1.0 + factor)) * los + np.sqrt(1.0 / (1.0 + factor)) * nlos


def sample_channels(positions: NodePositions, n_elements: int, fading: FadingConfig,
                    rng_direct: np.random.Generator,
                    rng_hap_irs: np.random.Generator,
                    rng_irs_device: np.random.Generator) -> ChannelRealization:
    """Draw one realization of all links.

    Draw order and counts are fixed so that identical streams give identical
    fading even when the geometry (hence path loss) differs.
    """
    k = positions.devices.shape[0]

    d_hap_irs = np.linalg.norm(positions.irs - positions.hap)
    pl_g = path_loss(d_hap_irs, fading, fading.pathloss_exponent_irs)
    los_g = _steering(n_elements, positions.irs, positions.hap)
    g = np.sqrt(pl_g) * _rician(rng_hap_irs, los_g, fading.rician_factor)

    h_r = np.empty((k, n_elements), dtype=complex)
    h_d = np.empty(k, dtype=complex)
    nlos_d = (rng_direct.standard_normal(k) + 1j * rng_direct.standard_normal(k)) / np.sqrt(2.0)
    for i in range(k):
        dev = positions.devices[i]
        d_irs_dev = np.linalg.norm(dev - positions.irs)
        pl_r = path_loss(d_irs_dev, fading, fading.pathloss_exponent_irs)
        los_r = _steering(n_elements, positions.irs, dev)
        h_r[i] = np.sqrt(pl_r) * _rician(rng_irs_device, los_r, fading.rician_factor)

        d_hap_dev = np.linalg.norm(dev - positions.hap)
        pl_d = path_loss(d_hap_dev, fading, fading.pathloss_exponent_direct)
        h_d[i] = np.sqrt(pl_d) * nlos_d[i]

    return ChannelRealization(g=g, h_r=h_r, h_d=h_d)


def realize(geometry: GeometryConfig, fading: FadingConfig, n_elements: int,
            master_seed: int, realization: int):
    """Place nodes and sample channels with the named per-realization streams."""
    positions = place_nodes(geometry, named_rng(master_seed, realization, "placement"))
    channels = sample_channels(
        positions, n_elements, fading,
        named_rng(master_seed, realization, "direct"),
        named_rng(master_seed, realization, "hap_irs"),
        named_rng(master_seed, realization, "irs_device"))
    return positions, channels
