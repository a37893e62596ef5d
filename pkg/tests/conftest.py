import numpy as np
import pytest

from evdeblur.checks import Harness
from evdeblur.core import EventStream, TimeInterval


@pytest.fixture(scope="session")
def harness():
    h = Harness(seed=0)
    h.stream  # build once per session
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stream(events, width=4, height=3, span=(0.0, 1.0)):
    return EventStream.from_events(events, width, height, TimeInterval(*span))


def random_stream(rng, n, width=8, height=6, span=(0.0, 1.0)):
    t = np.sort(rng.uniform(*span, size=n))
    return EventStream(t, rng.integers(0, width, n), rng.integers(0, height, n),
                       rng.choice([-1, 1], n), width, height, TimeInterval(*span))
