import warnings

import numpy as np
import pytest

from irswpcn.channels import ChannelRealization, FadingConfig, realize
from irswpcn.derived import derive_channel
from irswpcn.geometry import GeometryConfig
from irswpcn.params import SystemParams, default_params

warnings.filterwarnings("ignore", message="Solution may be inaccurate")


@pytest.fixture(scope="session")
def paper_defaults() -> SystemParams:
    return default_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def make_instance(master_seed=42, realization=0, n=10, k=4,
                  x_ue=10.0, x_irs=10.0):
    geo = GeometryConfig(irs_x=x_irs, cluster_center_x=x_ue,
                         cluster_radius=1.0, num_devices=k)
    _, ch = realize(geo, FadingConfig(), n, master_seed, realization)
    return derive_channel(ch)


def synthetic_derived(rng, n=4, k=2, scale=1.0):
    """Unit-scale random channels for math-identity tests."""
    g = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    h_r = scale * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    h_d = scale * (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
    return derive_channel(ChannelRealization(g=g, h_r=h_r, h_d=h_d))


def unit_params(n=4, k=2, **overrides) -> SystemParams:
    """O(1) parameters for synthetic-instance tests."""
    base = dict(p_a=1.0, p_f=1.0, sigma_n1=0.1, sigma_n2=0.1,
                sigma_z1=0.1, sigma_z2=1.0, eta=0.8, t_max=1.0, a_max=4.0,
                weights=np.ones(k), num_elements=n, num_devices=k)
    base.update(overrides)
    return SystemParams(**base)
