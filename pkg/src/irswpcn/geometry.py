"""Node placement: one HAP, one elevated IRS, a disk-shaped device cluster."""

from dataclasses import dataclass, field

import numpy as np

IRS_HEIGHT = 2.0   # meters; devices sit at ground level


@dataclass(frozen=True)
class GeometryConfig:
    irs_x: float                    # IRS at (irs_x, 0, IRS_HEIGHT)
    cluster_center_x: float         # devices inside a disk at (x, 0, 0)
    cluster_radius: float
    num_devices: int
    hap_position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        hap = np.asarray(self.hap_position, dtype=float)
        object.__setattr__(self, "hap_position", hap)
        if self.cluster_radius < 0:
            raise ValueError("cluster_radius must be >= 0")
        if self.num_devices < 1:
            raise ValueError("need at least one device")
        if not (np.all(np.isfinite(hap)) and np.isfinite(self.irs_x)
                and np.isfinite(self.cluster_center_x)):
            raise ValueError("coordinates must be finite")


@dataclass(frozen=True)
class NodePositions:
    hap: np.ndarray                 # (3,)
    irs: np.ndarray                 # (3,)
    devices: np.ndarray             # (K, 3)


def place_nodes(config: GeometryConfig, rng: np.random.Generator) -> NodePositions:
    """Drop devices uniformly over the cluster disk (height 0).

    The unit-disk draws are independent of center and radius, so sweeps
    that move the cluster keep each realization's relative layout.
    """
    k = config.num_devices
    radii = np.sqrt(rng.random(k))          # uniform over unit disk
    angles = 2.0 * np.pi * rng.random(k)
    devices = np.zeros((k, 3))
    devices[:, 0] = config.cluster_center_x + config.cluster_radius * radii * np.cos(angles)
    devices[:, 1] = config.cluster_radius * radii * np.sin(angles)
    irs = np.array([config.irs_x, 0.0, IRS_HEIGHT])
    return NodePositions(hap=config.hap_position.copy(), irs=irs, devices=devices)
