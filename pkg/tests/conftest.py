import itertools

import numpy as np
import pytest

from irsbeam.channel import draw
from irsbeam.model import SystemConfig


def all_pins(m):
    return np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64)


def brute_force_power(hc, p0, p_pin):
    """max over feasible b of (P0 - P_PIN 1^T b) * ||H_c^H (2b - 1)||^2, and the argmax."""
    pins = all_pins(hc.shape[0])
    p_rem = p0 - p_pin * pins.sum(axis=1)
    gains = np.linalg.norm((2 * pins - 1) @ hc.conj(), axis=1) ** 2
    obj = np.where(p_rem >= 0, p_rem * gains, -np.inf)
    j = int(np.argmax(obj))
    return float(obj[j]), pins[j]


def rand_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cfg():
    return SystemConfig(n_bs_antennas=3, irs_x=2, irs_y=3, n_users=2, p0=0.1)


@pytest.fixture
def small_channel(small_cfg):
    return draw(small_cfg, 7, 0)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
