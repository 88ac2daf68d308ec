import numpy as np
import pytest

from nn3d.fixtures import make_fixtures


def seeded_plane(shape, seed, lo=0.0, hi=255.0):
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(lo, hi, shape)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("corpus")
    make_fixtures(outdir)
    return outdir
