"""Shared helpers for the test suite."""

from __future__ import annotations

import pytest

from kernelagent import AgentConfig

FIXED_TIME = "2026-01-05 00:00:00"


def code(source: str, identifier: str = "python") -> str:
    """Wrap cell source in a fenced block the way a model response would."""
    return f"```{identifier}\n{source}\n```"


@pytest.fixture
def fixed_config() -> AgentConfig:
    return AgentConfig(current_time=FIXED_TIME)
