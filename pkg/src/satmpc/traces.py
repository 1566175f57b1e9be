"""CSV trace logs: one row per 15-minute step of a closed-loop run.

Schema (5 + 4Z columns for Z zones):

    timestamp, step, oat, sat,
    temp_01, flow_01, reheat_01, setpoint_01, ..., energy_kwh

with a `# manifest: {...}` JSON comment on the first line carrying the
config hash, seed, and package version.  Floats are written with repr
precision so a written file reads back to identical values.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .timebase import STEP, format_ts, parse_ts, to_utc

__all__ = ["TraceError", "TraceSet", "expected_columns"]

MANIFEST_PREFIX = "# manifest: "


class TraceError(ValueError):
    """Trace file violates the schema; message cites the file line."""


def expected_columns(n_zones):
    """Header names for a Z-zone trace, in file order."""
    cols = ["timestamp", "step", "oat", "sat"]
    for j in range(n_zones):
        z = f"{j + 1:02d}"
        cols += [f"temp_{z}", f"flow_{z}", f"reheat_{z}", f"setpoint_{z}"]
    cols.append("energy_kwh")
    return cols


def _fmt(x):
    return repr(float(x))


@dataclass(frozen=True)
class TraceSet:
    """In-memory trace: arrays indexed [step] or [step, zone].

    Row k logs the state measured at the start of step k, the SAT and
    outside air temperature applied during it, and the energy it
    consumed.
    """

    start: "datetime"
    oat: np.ndarray
    sat: np.ndarray
    temps: np.ndarray
    flows: np.ndarray
    reheats: np.ndarray
    setpoints: np.ndarray
    energy: np.ndarray
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "start", to_utc(self.start))
        for name in ("oat", "sat", "energy"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be 1-D")
            object.__setattr__(self, name, arr)
        k = self.oat.shape[0]
        for name in ("temps", "flows", "reheats", "setpoints"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[0] != k:
                raise ValueError(f"{name} must be [steps, zones] with {k} steps, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if self.sat.shape[0] != k or self.energy.shape[0] != k:
            raise ValueError("per-step arrays must share one length")
        for name in ("oat", "sat", "temps", "flows", "reheats", "setpoints", "energy"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n_steps(self):
        return self.oat.shape[0]

    @property
    def n_zones(self):
        return self.temps.shape[1]

    @property
    def total_energy(self):
        return float(self.energy.sum())

    def timestamps(self):
        return [self.start + k * STEP for k in range(self.n_steps)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(MANIFEST_PREFIX + json.dumps(self.manifest, sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(expected_columns(self.n_zones))
            for k in range(self.n_steps):
                row = [format_ts(self.start + k * STEP), str(k), _fmt(self.oat[k]), _fmt(self.sat[k])]
                for j in range(self.n_zones):
                    row += [
                        _fmt(self.temps[k, j]),
                        _fmt(self.flows[k, j]),
                        _fmt(self.reheats[k, j]),
                        _fmt(self.setpoints[k, j]),
                    ]
                row.append(_fmt(self.energy[k]))
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            text = fh.read()
        return cls.from_csv_text(text, source=str(path))

    @classmethod
    def from_csv_text(cls, text, source="<string>"):
        lines = text.splitlines()
        if not lines:
            raise TraceError(f"{source}: empty file")
        manifest = {}
        body_start = 1
        if lines[0].startswith("#"):
            if lines[0].startswith(MANIFEST_PREFIX):
                try:
                    manifest = json.loads(lines[0][len(MANIFEST_PREFIX):])
                except json.JSONDecodeError as exc:
                    raise TraceError(f"{source} line 1: bad manifest JSON ({exc})") from None
            body_start = 2
            if len(lines) < 2:
                raise TraceError(f"{source}: missing header row")
            header_line = lines[1]
        else:
            header_line = lines[0]
            body_start = 1

        header = next(csv.reader(io.StringIO(header_line)))
        n_cols = len(header)
        if n_cols < 9 or (n_cols - 5) % 4 != 0:
            raise TraceError(
                f"{source} line {body_start}: {n_cols} columns do not fit the "
                "5 + 4*zones trace layout"
            )
        n_zones = (n_cols - 5) // 4
        expected = expected_columns(n_zones)
        for want, got in zip(expected, header):
            if want != got:
                raise TraceError(f"{source} line {body_start}: expected column {want!r}, found {got!r}")

        rows = list(csv.reader(lines[body_start:]))
        k_total = len(rows)
        oat = np.empty(k_total)
        sat = np.empty(k_total)
        energy = np.empty(k_total)
        temps = np.empty((k_total, n_zones))
        flows = np.empty((k_total, n_zones))
        reheats = np.empty((k_total, n_zones))
        setpoints = np.empty((k_total, n_zones))
        start = None
        prev_ts = None
        for k, row in enumerate(rows):
            line_no = body_start + 1 + k
            if len(row) != n_cols:
                raise TraceError(f"{source} line {line_no}: {len(row)} fields, expected {n_cols}")
            try:
                ts = parse_ts(row[0])
            except ValueError as exc:
                raise TraceError(f"{source} line {line_no}: bad timestamp {row[0]!r} ({exc})") from None
            if prev_ts is not None:
                gap = (ts - prev_ts).total_seconds()
                if gap != STEP.total_seconds():
                    raise TraceError(
                        f"{source} line {line_no}: {gap / 60:.0f}-minute gap; "
                        "samples must be strictly increasing at 15-minute spacing"
                    )
            prev_ts = ts
            if start is None:
                start = ts
            try:
                step_idx = int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise TraceError(f"{source} line {line_no}: non-numeric field ({exc})") from None
            if step_idx != k:
                raise TraceError(f"{source} line {line_no}: step index {step_idx}, expected {k}")
            oat[k], sat[k] = vals[0], vals[1]
            for j in range(n_zones):
                base = 2 + 4 * j
                temps[k, j], flows[k, j], reheats[k, j], setpoints[k, j] = vals[base : base + 4]
            energy[k] = vals[-1]

        if start is None:
            raise TraceError(f"{source}: no data rows")
        return cls(
            start=start,
            oat=oat,
            sat=sat,
            temps=temps,
            flows=flows,
            reheats=reheats,
            setpoints=setpoints,
            energy=energy,
            manifest=manifest,
        )
