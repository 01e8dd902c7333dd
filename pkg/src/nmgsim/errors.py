#!/usr/bin/env python3

from __future__ import annotations as _annotations

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Iterable


class NmgError(Exception):
    pass


class ScenarioError(NmgError, ValueError):
    """
    Raised by the scenario parser.

    Syntax errors carry the offending line number, semantic errors are
    aggregated so that one run of the parser reports everything wrong with a
    file at once.
    """

    errors: tuple[str, ...]
    line: int | None

    def __init__(self, errors: Iterable[str] | str, line: int | None = None) -> None:
        self.errors = (errors,) if isinstance(errors, str) else tuple(errors)
        self.line = line
        super().__init__('; '.join(self.errors))


class TopologyError(NmgError, ValueError):
    pass


class ControllerError(NmgError, ValueError):
    pass


class SolverError(NmgError, RuntimeError):

    t: float | None
    island: tuple[str, ...] | None
    condition: str

    def __init__(
        self,
        condition: str,
        *,
        t: float | None = None,
        island: Iterable[str] | None = None,
    ) -> None:
        self.condition = condition
        self.t = t
        self.island = tuple(island) if island is not None else None
        where = []
        if t is not None:
            where.append(f"t={t:.6g} s")
        if self.island is not None:
            where.append(f"island={{{', '.join(self.island)}}}")
        super().__init__(f"{condition} ({', '.join(where)})" if where else condition)


class TraceFormatError(NmgError, ValueError):
    pass
