import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
DOC_SYSTEMS = pathlib.Path(__file__).parent.parent / "docs" / "systems"


@pytest.fixture
def fixture_path():
    def _path(name: str) -> str:
        return str(FIXTURES / name)
    return _path


@pytest.fixture
def doc_system_path():
    def _path(name: str) -> str:
        return str(DOC_SYSTEMS / name)
    return _path
