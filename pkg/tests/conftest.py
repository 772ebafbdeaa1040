"""Shared test setup.

BLAS thread pools are pinned to one thread before numpy ever loads so that
every numerical result in the suite is reproducible bit for bit.
"""

import os

for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from lamcore import IGNORE_ID, LabelMap  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_labels(rng, class_count, height, width, ignore_fraction=0.0):
    """Seeded label map with an optional sprinkling of ignore pixels."""
    ids = rng.integers(0, class_count, size=(height, width)).astype(np.uint16)
    if ignore_fraction > 0:
        ids[rng.random((height, width)) < ignore_fraction] = IGNORE_ID
        if (ids == IGNORE_ID).all():
            ids[0, 0] = 0
    return LabelMap(ids)
