"""Plain-text file formats.

Shot records: a header line ``# setting_id=<label> dark=<0|1>`` followed by
one voltage per line.

Reports: ``key=value`` header lines, then tables introduced by
``[table <name>]``, a tab-separated column line and tab-separated rows,
closed by ``[end]``. Floats are written with ``repr`` so a report read back
reproduces the in-memory numbers exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detection import ShotSeries
from .errors import ShotFileError

_HEADER_RE = re.compile(r"^#\s*setting_id=(\S*)\s+dark=([01])\s*$")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_shot_file(path, series: ShotSeries) -> None:
    if any(c.isspace() for c in series.setting_id):
        raise ValueError("setting ids may not contain whitespace")
    lines = [f"# setting_id={series.setting_id} dark={int(series.is_dark)}"]
    lines += [repr(float(v)) for v in series.voltages]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_shot_file(path) -> ShotSeries:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ShotFileError(f"{path}: {exc.strerror or exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ShotFileError(f"{path}: empty shot file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise ShotFileError(f"{path}: bad header line {lines[0]!r}")
    try:
        volts = [float(s) for s in lines[1:] if s.strip()]
    except ValueError as exc:
        raise ShotFileError(f"{path}: {exc}") from None
    try:
        return ShotSeries(volts, setting_id=m.group(1), is_dark=m.group(2) == "1")
    except ValueError as exc:
        raise ShotFileError(f"{path}: {exc}") from None


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the columns")
        self.rows.append([fmt(v) for v in values])

    def column(self, name, kind=float):
        i = self.columns.index(name)
        return [kind(r[i]) for r in self.rows]


@dataclass
class ReportFile:
    header: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def set(self, key, value):
        self.header[key] = fmt(value)

    def get(self, key, kind=str, default=None):
        if key not in self.header:
            if default is not None:
                return default
            raise ShotFileError(f"report has no {key!r} entry")
        return kind(self.header[key])

    def table(self, name, columns=None) -> Table:
        if columns is not None:
            self.tables[name] = Table(list(columns))
        try:
            return self.tables[name]
        except KeyError:
            raise ShotFileError(f"report has no table {name!r}") from None

    def to_text(self) -> str:
        out = [f"{k}={v}" for k, v in self.header.items()]
        for name, t in self.tables.items():
            out.append(f"[table {name}]")
            out.append("\t".join(t.columns))
            out += ["\t".join(r) for r in t.rows]
            out.append("[end]")
        return "\n".join(out) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), newline="\n")

    @classmethod
    def from_text(cls, text: str) -> ReportFile:
        rep = cls()
        lines = iter(text.splitlines())
        for line in lines:
            if not line.strip():
                continue
            if line.startswith("[table ") and line.endswith("]"):
                name = line[len("[table "):-1]
                try:
                    columns = next(lines).split("\t")
                except StopIteration:
                    raise ShotFileError(f"table {name!r} has no column line") from None
                t = rep.table(name, columns)
                for row in lines:
                    if row == "[end]":
                        break
                    t.rows.append(row.split("\t"))
                else:
                    raise ShotFileError(f"table {name!r} is not terminated")
                continue
            if "=" not in line:
                raise ShotFileError(f"bad report line {line!r}")
            k, v = line.split("=", 1)
            rep.header[k] = v
        return rep

    @classmethod
    def read(cls, path) -> ReportFile:
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as exc:
            raise ShotFileError(f"{path}: {exc.strerror or exc}") from exc
