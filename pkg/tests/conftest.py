import numpy as np
import pytest

from missinfo import UnitDataset
from missinfo.models import (
    BernoulliMcarModel,
    BernoulliMcarUnit,
    NormalMeanModel,
    NormalMeanUnit,
    TiltingFamilyUnit,
    TiltingModel,
    TwoSampleAlleleModel,
    TwoSampleCountsUnit,
)

SIBPAIR_Z = (-np.sqrt(2.0), 0.0, np.sqrt(2.0))
SIBPAIR_NULL = (0.25, 0.5, 0.25)


@pytest.fixture(scope="session")
def two_sample_model():
    return TwoSampleAlleleModel()


@pytest.fixture(scope="session")
def allele_demo_unit():
    # 500 observed chromosomes per group, one missing person per observed
    # person in each group (500 missing chromosomes per group).
    return TwoSampleCountsUnit((300, 200), (250, 250), 500, 500)


@pytest.fixture(scope="session")
def allele_demo_data(allele_demo_unit):
    return UnitDataset.of([allele_demo_unit])


@pytest.fixture(scope="session")
def bernoulli_model():
    return BernoulliMcarModel()


@pytest.fixture()
def bernoulli_unit():
    rng = np.random.default_rng(11)
    obs = tuple(int(v) for v in rng.random(20) < 0.45)
    return BernoulliMcarUnit(obs, 20)


@pytest.fixture(scope="session")
def normal_model():
    return NormalMeanModel()


@pytest.fixture(scope="session")
def tilting_model():
    return TiltingModel()


def mixed_tilting_units():
    """Families with conflicting evidence so the fit stays interior."""
    return [
        TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, (0.10, 0.50, 0.40), 1.0),
        TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, (0.42, 0.43, 0.15), 0.9),
        TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, (0.20, 0.60, 0.20), 1.1),
        TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, (0.05, 0.55, 0.40), 1.0),
    ]


@pytest.fixture(scope="session")
def tilting_data():
    return UnitDataset.of(mixed_tilting_units())
