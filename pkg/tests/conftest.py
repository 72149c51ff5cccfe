import sys
from pathlib import Path

import pytest

# Ensure src directory is on the path for tests
SRC_PATH = Path(__file__).resolve().parents[1] / "src"
if SRC_PATH.exists():
    sys.path.insert(0, str(SRC_PATH))

from spinkeldysh.lattice import HamiltonianSpec, HamiltonianTerm, LatticeSpec, SpinRep, xz_chain  # noqa: E402

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def demo_spec():
    """Two-site XZ ring with J = 1, spin 1/2."""
    return xz_chain(2)


@pytest.fixture
def free_spins():
    """Two spin-1/2 sites with H = 0."""
    return HamiltonianSpec((), LatticeSpec(2), SpinRep(1))


@pytest.fixture
def single_spin():
    """One spin-1/2 in a field along z: H = s3."""
    return HamiltonianSpec((HamiltonianTerm.of(1.0, [(0, 3)]),), LatticeSpec(1), SpinRep(1))


@pytest.fixture
def configs_dir():
    return CONFIGS_DIR
