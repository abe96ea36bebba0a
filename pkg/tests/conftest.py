import numpy as np
import pytest

from src.core.gf2m import FieldSpec
from src.core.placement import JobSpec


@pytest.fixture
def example1_spec() -> JobSpec:
    """Three nodes, three functions, six files, r=2, s=1."""
    return JobSpec(K=3, Q=3, N=6, r=2, s=1, T=8)


@pytest.fixture
def example2_spec() -> JobSpec:
    """Four nodes, six functions, six files, r=2, s=2, T=4."""
    return JobSpec(K=4, Q=6, N=6, r=2, s=2, T=4)


@pytest.fixture
def gf8() -> FieldSpec:
    return FieldSpec.default(8)


@pytest.fixture
def gf3() -> FieldSpec:
    return FieldSpec(3, 0b1011)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
