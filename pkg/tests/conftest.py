import numpy as np
import pytest

from spcalda import LabeledDataset


@pytest.fixture
def d0():
    """Four points on the unit square: labels split along the y axis."""
    data = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
    return LabeledDataset(data, [1, 1, 2, 2])


def random_dataset(rng, n, p, k, separation=1.5):
    """Gaussian classes with random mean offsets; every class nonempty."""
    labels = 1 + np.arange(n) % k
    rng.shuffle(labels)
    means = separation * rng.standard_normal((k, p))
    data = rng.standard_normal((n, p)) + means[labels - 1]
    return LabeledDataset(data, labels)
