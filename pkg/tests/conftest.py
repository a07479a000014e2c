import numpy as np
import pytest

from motioncs.core import inner, l2_norm


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def assert_adjoint(op, rng, n_pairs=10, tol=1e-10):
    """Adjoint identity <A u, w> == <u, A' w> on random complex pairs."""
    for _ in range(n_pairs):
        u = random_complex(rng, op.domain_shape)
        w = random_complex(rng, op.range_shape)
        lhs = inner(op.apply(u), w)
        rhs = inner(u, op.adjoint(w))
        assert abs(lhs - rhs) <= tol * (l2_norm(u) * l2_norm(w))
