import shutil

import pytest

from tests.support import GOSHOP


@pytest.fixture
def goshop(tmp_path):
    """A private copy of the goshop module."""
    target = tmp_path / "goshop"
    shutil.copytree(GOSHOP, target)
    return str(target)


def pytest_collection_modifyitems(config, items):
    if shutil.which("go"):
        return
    skip = pytest.mark.skip(reason="go toolchain not on PATH")
    for item in items:
        if "go" in item.keywords:
            item.add_marker(skip)
