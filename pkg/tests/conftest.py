import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ballreg", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("ballreg")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_coeffs(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_real_coeffs(rng, profile):
    """Coefficients of a real spin-0 field (conjugate symmetric per shell)."""
    L = profile.L
    c = random_coeffs(rng, profile.coeff_shape)
    for ell in range(L):
        c[:, ell * ell + ell] = c[:, ell * ell + ell].real
        for m in range(1, ell + 1):
            c[:, ell * ell + ell - m] = (-1) ** m * np.conj(c[:, ell * ell + ell + m])
    return c


@pytest.fixture(scope="session")
def blob_solution():
    """Default experiment with a unit blob: ``(cfg, degraded, objective, report)``."""
    from ballreg.experiment import ExperimentConfig, degrade, solve

    cfg = ExperimentConfig(blob_amplitude=1.0)
    deg = degrade(cfg)
    obj, rep = solve(cfg, deg)
    return cfg, deg, obj, rep


# ---------------------------------------------------------------- acceptance summary

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, name): numbered acceptance criterion")
    config._acceptance = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, name = mark.args
    ok = call.excinfo is None
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    item.config._acceptance[n] = (name, ok, detail)


def pytest_terminal_summary(terminalreporter, config):
    res = getattr(config, "_acceptance", {})
    if not res:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(res):
        name, ok, detail = res[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
