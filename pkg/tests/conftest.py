from __future__ import annotations

import pytest

from moose.engine.prompts import TemplateSet


@pytest.fixture(scope="session")
def templates() -> TemplateSet:
    return TemplateSet.load()
