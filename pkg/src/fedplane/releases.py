"""Central release registry and the per-cluster reconciliation step.

Publishes are monotone per application; reconcilers jump straight to the
registry latest (declarative convergence, no stepwise replay), so a
cluster that missed several publishes emits exactly one upgrade per
drifted app on rejoin. Installed versions never decrease.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import ConflictError, ValidationError
from .model import Cluster, ClusterId

_VERSION_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)$")


def parse_version(text: str) -> tuple[int, int, int]:
    """major.minor.patch triple; precedence is numeric per component."""
    if not isinstance(text, str):
        raise ValidationError("version must be a string")
    match = _VERSION_RE.match(text)
    if not match:
        raise ValidationError(f"invalid version {text!r}: expected major.minor.patch")
    return int(match.group(1)), int(match.group(2)), int(match.group(3))


def version_newer(a: str, b: str) -> bool:
    return parse_version(a) > parse_version(b)


@dataclass(frozen=True)
class Release:
    app: str
    version: str
    digest: str
    published_at: int


@dataclass(frozen=True)
class SyncPolicy:
    """Auto applies upgrades on every poll; Scheduled only at multiples of
    the period (which must not be shorter than the poll cadence)."""

    mode: str = "auto"  # "auto" | "scheduled"
    period: int = 0
    poll_interval: int = 30

    def __post_init__(self):
        if self.mode not in ("auto", "scheduled"):
            raise ValidationError(f"unknown sync mode {self.mode!r}")
        if self.poll_interval <= 0:
            raise ValidationError("poll_interval must be > 0")
        if self.mode == "scheduled" and self.period < self.poll_interval:
            raise ValidationError("scheduled period must be >= poll_interval")

    def applies_at(self, now: int) -> bool:
        if self.mode == "auto":
            return True
        return now % self.period == 0


@dataclass(frozen=True)
class UpgradeAction:
    cluster: ClusterId
    app: str
    from_version: Optional[str]
    to_version: str
    applied_at: int

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "app": self.app,
            "from": self.from_version,
            "to": self.to_version,
            "applied_at": self.applied_at,
        }


class ReleaseRegistry:
    """Append-only per-app version history with a latest pointer."""

    def __init__(self):
        self.releases: dict[str, list[Release]] = {}

    def publish(self, app: str, version: str, digest: str, now: int) -> Release:
        if not app:
            raise ValidationError("application name must be non-empty")
        parsed = parse_version(version)
        history = self.releases.setdefault(app, [])
        if history:
            latest = parse_version(history[-1].version)
            if parsed == latest:
                raise ConflictError(f"release {app} {version} already published")
            if parsed < latest:
                raise ConflictError(
                    f"release {app} {version} is older than latest {history[-1].version}"
                )
        release = Release(app=app, version=version, digest=digest, published_at=now)
        history.append(release)
        return release

    def latest(self, app: str) -> Optional[Release]:
        history = self.releases.get(app)
        return history[-1] if history else None

    def versions_newer_than(self, app: str, version: str) -> int:
        installed = parse_version(version)
        return sum(
            1 for release in self.releases.get(app, []) if parse_version(release.version) > installed
        )

    def apps(self) -> list[str]:
        return sorted(self.releases)


def poll(
    cluster: Cluster,
    registry: ReleaseRegistry,
    policy: SyncPolicy,
    now: int,
    force: bool = False,
) -> list[UpgradeAction]:
    """One reconciliation pass: upgrade every hosted app that is behind
    the registry latest. force bypasses the schedule gate (rejoin poll).
    Caller guarantees the cluster is reachable."""
    if not force and not policy.applies_at(now):
        return []
    actions = []
    for app in sorted(cluster.installed):
        latest = registry.latest(app)
        if latest is None:
            continue
        installed = cluster.installed[app]
        if version_newer(latest.version, installed):
            actions.append(
                UpgradeAction(
                    cluster=cluster.id,
                    app=app,
                    from_version=installed,
                    to_version=latest.version,
                    applied_at=now,
                )
            )
            cluster.installed[app] = latest.version
    return actions


def drift_report(registry: ReleaseRegistry, clusters: dict[ClusterId, Cluster]) -> dict:
    """Per-cluster map of hosted app -> {installed, latest, behind_by}.
    Apps a cluster does not host are absent from its report."""
    report: dict[str, dict] = {}
    for cluster_id in sorted(clusters):
        cluster = clusters[cluster_id]
        entry = {}
        for app in sorted(cluster.installed):
            installed = cluster.installed[app]
            latest = registry.latest(app)
            entry[app] = {
                "installed": installed,
                "latest": latest.version if latest else installed,
                "behind_by": registry.versions_newer_than(app, installed),
            }
        report[cluster_id] = entry
    return report
