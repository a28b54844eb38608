"""CSV/JSON writers and the run manifest sidecar."""

import csv
from dataclasses import dataclass, field
import io
import json
import math
from pathlib import Path

from . import __version__

ERROR_HEADER = ("delta", "mean_sup_error", "rms_error", "std_error",
                "log2_delta", "log2_rms_error", "n_blowups")


def fmt(v):
    """Shortest text that round-trips a double: 17 significant digits."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def _log2(v):
    return math.log2(v) if v > 0 else -math.inf


def error_report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ERROR_HEADER)
    for r in report.records:
        w.writerow([fmt(r.delta), fmt(r.mean_sup_error), fmt(r.rms_error), fmt(r.std_error),
                    fmt(_log2(r.delta)), fmt(_log2(r.rms_error)), fmt(r.n_blowups)])
    reg = report.regression
    buf.write(f"# slope={fmt(reg.slope)}\n")
    buf.write(f"# r_squared={fmt(reg.r_squared)}\n")
    buf.write(f"# seed={report.config.seed}\n")
    return buf.getvalue()


def table_csv(header, rows, comments=()):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (int, float)) else v for v in row])
    for key, value in comments:
        buf.write(f"# {key}={value}\n")
    return buf.getvalue()


def write_text(text, destination):
    """Write to a path, or to a text stream such as sys.stdout."""
    if hasattr(destination, "write"):
        destination.write(text)
        return
    Path(destination).write_text(text)


def emit_csv(report, destination):
    write_text(error_report_csv(report), destination)


def read_error_csv(source):
    """Parse an error-report CSV back into row dicts and comment values."""
    text = Path(source).read_text() if not hasattr(source, "read") else source.read()
    rows, meta = [], {}
    lines = text.splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
            continue
        values = line.split(",")
        row = {}
        for k, v in zip(header, values):
            row[k] = int(v) if k == "n_blowups" else float(v)
        rows.append(row)
    return rows, meta


@dataclass
class RunManifest:
    command: str
    config: dict
    wall_clock_seconds: float
    rows: list = field(default_factory=list)
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "wall_clock_seconds": self.wall_clock_seconds,
            "rows": self.rows,
            "extra": self.extra,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(command=d["command"], config=d["config"],
                   wall_clock_seconds=d["wall_clock_seconds"], rows=d["rows"],
                   version=d["version"], extra=d["extra"])

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")


def manifest_path(output):
    return Path(str(output) + ".manifest.json")
