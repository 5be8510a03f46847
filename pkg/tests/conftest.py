from pathlib import Path

import pytest

from leakyspec.oracles import load_reference

REFERENCE = Path(__file__).parent / "reference" / "oracle_values.json"


@pytest.fixture(scope="session")
def reference():
    return load_reference(REFERENCE)
