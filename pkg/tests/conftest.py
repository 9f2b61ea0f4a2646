import os
import sys

import pytest

# Add the src folder to sys.path so tests can import modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))


@pytest.fixture(autouse=True)
def isolated_seed(monkeypatch):
    """Seeds come from the test, never from a RIGIDITY_SEED exported in the shell."""
    monkeypatch.delenv("RIGIDITY_SEED", raising=False)


@pytest.fixture
def write_config(tmp_path):
    """Write TOML text to tmp_path and return the path."""
    def _write(text, name="exp.toml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write
