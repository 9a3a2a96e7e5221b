import numpy as np
import pytest

from sparsehess.moments import MomentPair


def random_psd_moments(rng, p, n=None, spectrum=(0.3, 3.0)):
    """Well-conditioned random instance: PSD S with bounded spectrum,
    symmetric Q."""
    V = np.linalg.qr(rng.standard_normal((p, p)))[0]
    w = rng.uniform(*spectrum, size=p)
    S = (V * w) @ V.T
    S = (S + S.T) / 2
    Qr = rng.standard_normal((p, p))
    Q = (Qr + Qr.T) / 2
    return MomentPair(S=S, Q=Q, n=n or p + 5, p=p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
