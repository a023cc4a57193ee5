import numpy as np
import pytest

from gwlab.coupling import BiasParams, CoupledTrajectory, simulate_batch


def traj_from_uniforms(u, params: BiasParams, z=1) -> CoupledTrajectory:
    """Coupled run driven by a hand-picked uniform sequence and constant or given offspring."""
    u = np.asarray(u, dtype=float)
    if np.isscalar(z):
        z = np.full(u.size + 1, z, dtype=np.int32)
    z = np.asarray(z, dtype=np.int32)
    out = simulate_batch(u[None, :], z[None, :], params, int(z.max()))
    return CoupledTrajectory(params=params, u=u, z=z, **{k: v[0] for k, v in out.items()})


def path_from_steps(steps) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(steps)]).astype(np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
