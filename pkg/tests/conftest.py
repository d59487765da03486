import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def designed():
    """The default N = 1 design for lambda_1 = 1 (unit disk, square base lattice)."""
    from bandgap_forge.design import DesignInputs, design_crystal
    return design_crystal(DesignInputs(targets=(1.0,)))
