from pathlib import Path

import pytest

from qpa.program import load

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def program_text(name: str) -> str:
    return (PROGRAMS / name).read_text()


@pytest.fixture
def programs_dir() -> Path:
    return PROGRAMS


@pytest.fixture
def fig1():
    return load(program_text("fig1.qp"))


@pytest.fixture
def modexp8():
    return load(program_text("modexp8.qp"))
