import numpy as np
import pytest

from qbm_entanglement import analysis as an
from qbm_entanglement.bath_kernels import BathSpec
from qbm_entanglement.dynamics import ChannelKind, ChannelModel, evolve, squeezed_initial_state

# acceptance verdicts, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def common_window(gamma: float, Gamma: float) -> float:
    """Tail window set by the slower center-of-mass relaxation."""
    com = BathSpec(gamma, Gamma, 1.0, mass=2.0)
    from qbm_entanglement.bath_kernels import gamma_p_stationary
    return an.default_tail_window(gamma_p_stationary(com))


def log_grid(t_max: float, n: int = 601) -> np.ndarray:
    return np.concatenate(([0.0], np.geomspace(1e-4 * t_max, t_max, n - 1)))


_CACHE: dict = {}


def common_trajectory(gamma: float, Gamma: float, T: float, xi: float = 1.0):
    """COMMON_MODIFIED trajectory long enough for the drift check, plus its time scales."""
    key = (gamma, Gamma, T, xi)
    if key not in _CACHE:
        window = common_window(gamma, Gamma)
        model = ChannelModel(ChannelKind.COMMON_MODIFIED, BathSpec(gamma, Gamma, T))
        traj = evolve(model, squeezed_initial_state(xi), log_grid(2.0 * window))
        _CACHE[key] = (traj, an.detect_time_scales(traj, window))
    return _CACHE[key]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)
