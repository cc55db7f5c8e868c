import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from efgfom import games


@pytest.fixture(scope="session")
def kuhn():
    return games.generate_kuhn()


@pytest.fixture(scope="session")
def leduc3():
    return games.generate_leduc(3)
