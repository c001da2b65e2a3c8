"""Provenance header carried by every artifact file."""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from attriqa.errors import ConfigError
from attriqa.util.digests import short

PROGRAM = "attriqa"

_creator: ContextVar[str] = ContextVar("attriqa_creator", default=PROGRAM)


def current_creator() -> str:
    return _creator.get()


@contextmanager
def creator_command(command: str):
    """Stamp headers built inside the block with `attriqa <command>`."""
    token = _creator.set(f"{PROGRAM} {command}")
    try:
        yield
    finally:
        _creator.reset(token)


class ArtifactHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str
    version: int
    creator: str = Field(default_factory=current_creator)
    inputs: dict[str, str] = Field(default_factory=dict)
    meta: dict[str, Any] = Field(default_factory=dict)

    def require(self, fmt: str, version: int, source=None):
        where = f" in {source}" if source else ""
        if self.format != fmt:
            raise ConfigError(f"expected a {fmt} artifact{where}, found {self.format}")
        if self.version != version:
            raise ConfigError(
                f"{fmt}{where} has version {self.version}, this build reads {version}"
            )


def require_binding(what: str, expected: str | None, actual: str | None):
    """Refuse artifacts produced against a different input."""
    if expected != actual:
        raise ConfigError(
            f"{what} digest mismatch: expected {expected} ({short(expected)}), "
            f"found {actual} ({short(actual)})"
        )
