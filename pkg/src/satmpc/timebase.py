"""Shared 15-minute sampling timebase and timestamp helpers (UTC)."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

STEP_MINUTES = 15
STEP = timedelta(minutes=STEP_MINUTES)
STEPS_PER_HOUR = 60 // STEP_MINUTES
STEPS_PER_DAY = 24 * STEPS_PER_HOUR


def to_utc(ts):
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_ts(ts):
    return to_utc(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(text):
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def is_step_aligned(ts):
    ts = to_utc(ts)
    return ts.second == 0 and ts.microsecond == 0 and ts.minute % STEP_MINUTES == 0
