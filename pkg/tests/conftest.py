import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
for path in (ROOT, os.path.join(ROOT, "src")):
    if path not in sys.path:
        sys.path.insert(0, path)

from utils.settings import settings  # noqa: E402


@pytest.fixture(autouse=True)
def restore_settings():
    yield
    settings.reset()
