import numpy as np
import pytest

from beltloc import sim
from beltloc.calibration import calibrate
from beltloc.config import Config


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def naive_idft(spec):
    n = len(spec)
    k = np.arange(n)
    return (np.exp(2j * np.pi * np.outer(k, k) / n) @ spec) / n


def delayed_pair(rng, n, d, snr_db=None):
    """Two white-noise channels where channel 0 lags channel 1 by ``d`` samples."""
    s = rng.standard_normal(n + 200)
    x0 = s[100 - d:100 - d + n]
    x1 = s[100:100 + n]
    x = np.stack([x0, x1])
    if snr_db is not None:
        x = x + rng.standard_normal(x.shape) * np.sqrt(10 ** (-snr_db / 10))
    return x


@pytest.fixture(scope="session")
def geometry():
    return sim.make_geometry()


def calibrate_on_sim(geometry, snr_db=20.0, seed=100, offset=0.0, signal=None):
    signal = signal or sim.SignalSpec()
    recordings = {}
    for i, a in enumerate(sim.ANCHOR_ANGLES):
        sc = sim.BeltScenario(geometry, a - offset, 2.0, signal, 3.0, snr_db, seed + i)
        recordings[a] = sim.synthesize(sc)[0]
    silence = sim.synthesize_silence(
        sim.BeltScenario(geometry, 0.0, 2.0, signal, 3.0, snr_db, seed + 50))
    return calibrate(recordings, silence, Config())


@pytest.fixture(scope="session")
def sim_profile(geometry):
    return calibrate_on_sim(geometry)


def geometric_table(geometry, distance=2.0):
    """Per-degree delays straight from geometry; the ideal lookup table."""
    return np.array([sim.true_tdoas(geometry, a, distance) for a in range(360)])


def geometric_zero(geometry, k, distance=2.0):
    """Azimuth where mics k and k+1 are equidistant from the source (front side)."""
    from scipy.optimize import brentq
    guess = float(geometry.motor_azimuths()[2 * k - 1])
    f = lambda a: sim.true_tdoa(geometry, a, distance, (k, k + 1))
    return brentq(f, guess - 40, guess + 40, xtol=1e-12)


# one line per acceptance criterion, shown after the run
ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
