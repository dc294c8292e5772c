import numpy as np
import pytest

from igabeam import Formulation, RingParams
from igabeam.spectral import compute_spectrum_report


@pytest.fixture(scope="session")
def params():
    return RingParams.canonical()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def reports_p2(params):
    """Spectrum reports for all five formulations at p=2 on 64 and 512
    elements, shared by the acceptance criteria."""
    out = {}
    for kind in Formulation:
        for n_elem in (64, 512):
            report, modes, system = compute_spectrum_report(
                kind, 2, n_elem, params)
            out[(kind, n_elem)] = (report, modes, system)
    return out
