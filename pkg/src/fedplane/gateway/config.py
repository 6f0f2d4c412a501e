"""Plain-text key-value configuration for the gateway.

    listen = 127.0.0.1:8080
    data_dir = ./data
    clock = live                # live | simulated
    auth_tokens = tokens.txt
    booking_max_duration = 1209600
    booking_max_future_per_user = 4
    monitor_interval = 10
    monitor_miss_threshold = 3
    sync_mode = auto            # auto | scheduled:<period>
    poll_interval = 30
    snapshot_every = 100

FEDPLANE_LISTEN and FEDPLANE_DATA_DIR override the file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ValidationError
from ..model import AvailabilityPolicy
from ..plane import PlaneConfig
from ..releases import SyncPolicy

_KNOWN_KEYS = {
    "listen",
    "data_dir",
    "clock",
    "auth_tokens",
    "booking_max_duration",
    "booking_max_future_per_user",
    "monitor_interval",
    "monitor_miss_threshold",
    "sync_mode",
    "poll_interval",
    "snapshot_every",
}


@dataclass
class GatewayConfig:
    listen: str = "127.0.0.1:8080"
    data_dir: str = "./data"
    clock: str = "live"
    auth_tokens: str = ""
    booking_max_duration: int = 14 * 86400
    booking_max_future_per_user: int = 4
    monitor_interval: int = 10
    monitor_miss_threshold: int = 3
    sync_mode: str = "auto"
    poll_interval: int = 30
    snapshot_every: int = 100
    base_dir: Path = field(default_factory=Path)

    def plane_config(self) -> PlaneConfig:
        if self.sync_mode.startswith("scheduled:"):
            mode, period = "scheduled", int(self.sync_mode.split(":", 1)[1])
        elif self.sync_mode == "auto":
            mode, period = "auto", 0
        else:
            raise ValidationError(f"unknown sync_mode {self.sync_mode!r}")
        return PlaneConfig(
            availability=AvailabilityPolicy(
                interval=self.monitor_interval, miss_threshold=self.monitor_miss_threshold
            ),
            sync=SyncPolicy(mode=mode, period=period, poll_interval=self.poll_interval),
            max_booking_seconds=self.booking_max_duration,
            max_future_bookings_per_user=self.booking_max_future_per_user,
        )

    def resolved_data_dir(self) -> Path:
        path = Path(self.data_dir)
        return path if path.is_absolute() else self.base_dir / path

    def resolved_tokens_path(self) -> Path | None:
        if not self.auth_tokens:
            return None
        path = Path(self.auth_tokens)
        return path if path.is_absolute() else self.base_dir / path


def load_config(path: str | Path | None = None, env: dict | None = None) -> GatewayConfig:
    env = dict(os.environ if env is None else env)
    config = GatewayConfig()
    if path is not None:
        config.base_dir = Path(path).resolve().parent
        for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ValidationError(f"{path}:{line_no}: unknown key {key!r}")
            if key in (
                "booking_max_duration",
                "booking_max_future_per_user",
                "monitor_interval",
                "monitor_miss_threshold",
                "poll_interval",
                "snapshot_every",
            ):
                try:
                    setattr(config, key, int(value))
                except ValueError:
                    raise ValidationError(f"{path}:{line_no}: {key} must be an integer") from None
            else:
                setattr(config, key, value)
    if env.get("FEDPLANE_LISTEN"):
        config.listen = env["FEDPLANE_LISTEN"]
    if env.get("FEDPLANE_DATA_DIR"):
        config.data_dir = env["FEDPLANE_DATA_DIR"]
        config.base_dir = Path()
    if config.clock not in ("live", "simulated"):
        raise ValidationError(f"clock must be 'live' or 'simulated', got {config.clock!r}")
    return config
