import sys

import numpy as np
import pytest
from hypothesis import settings

from attrtransfer.datamodel import AttributeSchema

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hair_schema():
    """Four exclusive hair colours, two age groups and one free attribute."""
    return AttributeSchema.simple(
        ["Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair", "Young", "Senior", "Eyeglasses"],
        {"HairColor": ["Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair"], "Age": ["Young", "Senior"]},
    )


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in results:
        terminalreporter.write_line(f"{status}  {name}: {detail}")
