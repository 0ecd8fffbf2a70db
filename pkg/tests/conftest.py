import numpy as np
import pytest

from overlapfd import geometry


@pytest.fixture(scope="session")
def disk_nodes_coarse():
    """Reference disk node set at h=0.1 (about 360 nodes)."""
    return geometry.generate_reference_nodes(0.1, seed=0)


@pytest.fixture(scope="session")
def disk_nodes_mid():
    """Reference disk node set at h=0.072 (about 760 extended nodes)."""
    return geometry.generate_reference_nodes(0.072, seed=0)


@pytest.fixture(scope="session")
def ellipse_model():
    """Domain model with the two standard embedded ellipses at t=0."""
    k = 20
    mu = 2 * np.pi * np.arange(k) / k
    e1 = geometry.fit_boundary(
        np.column_stack([0.4 * np.cos(mu), -0.5 + 0.2 * np.sin(mu)]))
    e2 = geometry.fit_boundary(
        np.column_stack([0.1 * np.cos(mu), 0.2 * np.sin(mu)]))
    return geometry.DomainModel(embedded=[e1, e2], t=0.0)


@pytest.fixture(scope="session")
def adapted_nodes(disk_nodes_mid, ellipse_model):
    return geometry.adapt_nodes(disk_nodes_mid, ellipse_model)
