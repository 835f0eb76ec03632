import warnings

import pytest

from edgeadmit.config import (
    default_penalty_table,
    default_running_table,
)
from edgeadmit.model import CostModel, CostTableWarning, ModelParams, ResourceDist


@pytest.fixture(scope="session")
def canonical_params() -> ModelParams:
    return ModelParams(
        buffer_capacity=20,
        cpu_levels=20,
        cores=2,
        service_rate=3.0,
        discount_beta=0.95,
    )


@pytest.fixture(scope="session")
def canonical_costs() -> CostModel:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CostTableWarning)
        return CostModel(
            holding=0.12,
            running=default_running_table(),
            penalty=default_penalty_table(),
        )


@pytest.fixture(scope="session")
def canonical_resources() -> ResourceDist:
    return ResourceDist(pmf=[0.6, 0.4])


@pytest.fixture(autouse=True)
def _silence_cost_table_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CostTableWarning)
        yield
