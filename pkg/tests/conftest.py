import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kkmini import BoundKernel, KernelSpec, gen_blobs

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def blobs300():
    return gen_blobs(300, 4, 2, 1.0, seed=3)


@pytest.fixture
def gauss300(blobs300):
    return BoundKernel(KernelSpec.gaussian(4.0), blobs300.points, materialize=True)


def random_psd_kernel(rng, n, d=3):
    """A random PSD kernel among the analytic kinds, bound to random points."""
    pts = rng.normal(size=(n, d))
    kind = rng.integers(3)
    if kind == 0:
        spec = KernelSpec.gaussian(float(rng.uniform(0.5, 8.0)))
    elif kind == 1:
        spec = KernelSpec.linear()
    else:
        spec = KernelSpec.polynomial(int(rng.integers(1, 4)), float(rng.uniform(0.0, 2.0)))
    return BoundKernel(spec, pts)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
