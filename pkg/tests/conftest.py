import math

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nctorus.chains import Chain
from nctorus.torus import DeformationPoint, SkewMatrix, TorusElement

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def theta2():
    return SkewMatrix.two(GOLDEN)


@pytest.fixture
def p2(theta2):
    return DeformationPoint(theta2, 0.7)


def u(*alpha, c=1.0):
    return TorusElement.monomial(tuple(alpha), c)


coeffs = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-3)


def indices(n=2, bound=3, nonzero=False):
    s = st.tuples(*[st.integers(-bound, bound)] * n)
    return s.filter(any) if nonzero else s


def elements(n=2, bound=3, max_size=5):
    return st.dictionaries(indices(n, bound), coeffs, min_size=1, max_size=max_size).map(lambda d: TorusElement(n, d))


def chains(n=2, degree=None, max_degree=4, bound=2, max_size=4, invariant=False):
    deg = st.just(degree) if degree is not None else st.integers(0, max_degree)

    def build(d):
        inner = st.tuples(*[indices(n, bound, nonzero=True)] * d) if d else st.just(())
        if invariant:
            key = inner.map(lambda xs: (tuple(-sum(a[i] for a in xs) for i in range(n)), *xs))
        else:
            key = st.tuples(indices(n, bound), inner).map(lambda hx: (hx[0], *hx[1]))
        return st.dictionaries(key, coeffs, min_size=1, max_size=max_size).map(lambda t: Chain(n, d, t))

    return deg.flatmap(build)


def points(n=2):
    return st.floats(-1.5, 1.5).map(lambda t: DeformationPoint(SkewMatrix.two(GOLDEN), t))
