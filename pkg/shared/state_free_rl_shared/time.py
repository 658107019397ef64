from __future__ import annotations

from datetime import datetime, timezone

UTC = timezone.utc


def utc_now() -> datetime:
    """Current UTC time truncated to whole seconds, as stamped on reports and run summaries."""
    return datetime.now(UTC).replace(microsecond=0)
