"""Bearer-token authentication stub and the gateway's action table.

Identity is delegated to whatever sits in front of the gateway; here a
static table maps tokens to user ids, with an optional admin flag for the
federation-admin role that lives outside any project.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError

# Every project-scoped action the gateway performs on behalf of a user.
# All of them carry identical privileges for project members; the table
# exists so tests can prove the verdict never depends on the action name.
PROJECT_ACTIONS = (
    "view-project",
    "read-data",
    "spawn-workspace",
    "list-workspaces",
    "book",
    "list-bookings",
    "cancel-booking",
)


@dataclass(frozen=True)
class Identity:
    user: str
    admin: bool = False


class TokenTable:
    def __init__(self, tokens: dict[str, Identity] | None = None):
        self.tokens = tokens or {}

    @classmethod
    def from_file(cls, path: str | Path) -> "TokenTable":
        """One mapping per line: `<token> <user> [admin]`."""
        tokens = {}
        for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "admin"):
                raise ValidationError(
                    f"{path}:{line_no}: expected '<token> <user> [admin]'"
                )
            tokens[parts[0]] = Identity(user=parts[1], admin=len(parts) == 3)
        return cls(tokens)

    def resolve(self, token: str | None) -> Identity | None:
        if token is None:
            return None
        return self.tokens.get(token)
