"""Parsers for the stroke (BioIdent) and motion (HMOG) sources and the
canonical fused CSV.

Every parser takes a ``source`` that may be raw bytes, a ``str`` of CSV
text, a path, or an open file object. Rows that fail a record invariant are
rejected with an :class:`~touchauth.errors.IngestError` naming the row; no
value is ever imputed.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import astuple, dataclass

from .dataset import FusedDataset, FusedSample
from .errors import IngestError
from .schema import (
    CANONICAL_HEADER,
    DIRECTION_CODES,
    MOTION_FIELDS,
    N_MOTION,
    N_TOUCH,
    TOUCH_FIELDS,
)


@dataclass(frozen=True)
class StrokeRecord:
    user_id: str
    stroke_duration: float
    start_x: float
    start_y: float
    stop_x: float
    stop_y: float
    direct_end_to_end_distance: float
    mean_resultant_length: float
    up_down_left_right: float
    direction_of_end_to_end_line: float
    largest_deviation_from_end_to_end: float
    average_direction: float
    length_of_trajectory: float
    average_velocity: float
    mid_stroke_pressure: float
    mid_stroke_area_covered: float

    @property
    def features(self) -> tuple[float, ...]:
        return astuple(self)[1:]


@dataclass(frozen=True)
class MotionRecord:
    """One accelerometer/gyroscope/magnetometer snapshot.

    ``timestamp`` and ``session`` are optional bookkeeping columns; they are
    not features. When every snapshot of a user carries a timestamp, fusion
    orders that user's snapshots by it.
    """

    user_id: str
    acc_x: float
    acc_y: float
    acc_z: float
    gyro_x: float
    gyro_y: float
    gyro_z: float
    mag_x: float
    mag_y: float
    mag_z: float
    timestamp: float | None = None
    session: str | None = None

    @property
    def features(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in MOTION_FIELDS)


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


def stroke_violations(values) -> list[str]:
    """Invariant violations of a 15-value touch feature tuple (empty if valid)."""
    rec = dict(zip(TOUCH_FIELDS, values))
    problems = [f"{k} is not finite" for k, v in rec.items() if not math.isfinite(v)]
    if problems:
        return problems
    if rec["stroke_duration"] <= 0:
        problems.append("stroke_duration must be > 0")
    if rec["direct_end_to_end_distance"] < 0:
        problems.append("direct_end_to_end_distance must be >= 0")
    if rec["length_of_trajectory"] < rec["direct_end_to_end_distance"]:
        problems.append("length_of_trajectory < direct_end_to_end_distance")
    if not 0.0 <= rec["mean_resultant_length"] <= 1.0:
        problems.append("mean_resultant_length outside [0, 1]")
    return problems


def validate_sample(sample: FusedSample) -> list[str]:
    """Invariant violations of a fused sample (empty if valid)."""
    problems = stroke_violations(sample.touch)
    problems += [
        f"{name} is not finite"
        for name, v in zip(MOTION_FIELDS, sample.motion)
        if not math.isfinite(v)
    ]
    return problems


# -- low level table handling ---------------------------------------------


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if isinstance(source, os.PathLike):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def read_raw_table(source, has_header=True) -> RawTable:
    """Split CSV text into header and string cells.

    Blank lines are skipped. Without a header the columns are named by
    position (``"0"``, ``"1"``, ...).
    """
    text = _read_text(source)
    lines = [row for row in csv.reader(io.StringIO(text)) if row]
    if not lines:
        raise IngestError("empty input")
    if has_header:
        header, body = tuple(c.strip() for c in lines[0]), lines[1:]
    else:
        header, body = tuple(str(i) for i in range(len(lines[0]))), lines
    rows = []
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise IngestError(
                f"expected {len(header)} cells, found {len(row)}", row=i
            )
        rows.append(tuple(row))
    return RawTable(header, tuple(rows))


def write_raw_table(table: RawTable) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    writer.writerows(table.rows)
    return buf.getvalue().encode("utf-8")


def parse_mapping(source) -> dict[str, str | int]:
    """Parse a column-mapping file of ``field = source_column`` lines.

    ``#`` starts a comment. A purely numeric source column is taken as a
    0-based position, for header-less exports.
    """
    mapping: dict[str, str | int] = {}
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise IngestError(f"mapping line {lineno} is not 'field = column'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise IngestError(f"mapping line {lineno} is not 'field = column'")
        mapping[key] = int(value) if value.isdigit() else value
    return mapping


def mapping_for(mapping, source: str) -> dict:
    """Mapping entries for one source.

    Keys prefixed ``<source>.`` (e.g. ``hmog.user_id``) apply only to that
    source and override unprefixed keys; other prefixed keys are dropped.
    """
    out, specific = {}, {}
    for key, value in (mapping or {}).items():
        if "." not in key:
            out[key] = value
        elif key.startswith(source + "."):
            specific[key[len(source) + 1:]] = value
    out.update(specific)
    return out


def _resolve_columns(table, wanted, schema, optional=()):
    """Map each wanted field to a column position in ``table``."""
    schema = dict(schema or {})
    positions = {}
    for name in tuple(wanted) + tuple(optional):
        column = schema.get(name, name if name in wanted else None)
        if column is None:
            continue
        if isinstance(column, int):
            if not 0 <= column < len(table.header):
                raise IngestError(f"position {column} out of range", column=name)
            positions[name] = column
        elif column in table.header:
            positions[name] = table.header.index(column)
        elif name in wanted:
            raise IngestError("missing required column", column=column)
        else:
            raise IngestError("mapped column not found", column=column)
    return positions


def _number(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise IngestError(f"malformed numeric cell {cell!r}", row=row, column=column)
    return value


def _direction_code(cell, row):
    key = cell.strip().lower()
    if key in DIRECTION_CODES:
        return float(DIRECTION_CODES[key])
    return _number(cell, row, "up_down_left_right")


# -- source parsers ---------------------------------------------------------


def parse_bioident(source, schema=None, has_header=True) -> list[StrokeRecord]:
    """Parse stroke features into :class:`StrokeRecord` objects.

    Parameters
    ----------
    source : bytes, str, path or file
        Comma-separated text.
    schema : dict, optional
        Maps record field names (``user_id`` and the 15 touch features) to
        source column names or 0-based positions. Unmapped fields are looked
        up under their own name.
    has_header : bool
        Whether the first row is a header. Without one every field must be
        mapped to a position.

    Raises
    ------
    IngestError
        Empty input, missing column, malformed cell or invariant violation.
    """
    table = read_raw_table(source, has_header=has_header)
    cols = _resolve_columns(table, ("user_id",) + TOUCH_FIELDS, schema)
    records = []
    for i, row in enumerate(table.rows, start=1):
        values = []
        for name in TOUCH_FIELDS:
            cell = row[cols[name]]
            if name == "up_down_left_right":
                values.append(_direction_code(cell, i))
            else:
                values.append(_number(cell, i, name))
        problems = stroke_violations(values)
        if problems:
            raise IngestError("; ".join(problems), row=i)
        records.append(StrokeRecord(row[cols["user_id"]].strip(), *values))
    return records


def parse_hmog(source, schema=None, session=None, has_header=True) -> list[MotionRecord]:
    """Parse motion snapshots into :class:`MotionRecord` objects.

    Same conventions as :func:`parse_bioident`; ``schema`` may additionally
    map the optional ``timestamp`` and ``session`` columns. When ``session``
    is given, only rows of that session are returned.
    """
    table = read_raw_table(source, has_header=has_header)
    cols = _resolve_columns(
        table, ("user_id",) + MOTION_FIELDS, schema, optional=("timestamp", "session")
    )
    if session is not None and "session" not in cols:
        raise IngestError("session selection requires a mapped session column")
    records = []
    for i, row in enumerate(table.rows, start=1):
        row_session = row[cols["session"]].strip() if "session" in cols else None
        if session is not None and row_session != str(session):
            continue
        values = [_number(row[cols[name]], i, name) for name in MOTION_FIELDS]
        for name, v in zip(MOTION_FIELDS, values):
            if not math.isfinite(v):
                raise IngestError(f"{name} is not finite", row=i, column=name)
        stamp = None
        if "timestamp" in cols:
            stamp = _number(row[cols["timestamp"]], i, "timestamp")
        records.append(
            MotionRecord(row[cols["user_id"]].strip(), *values, timestamp=stamp,
                         session=row_session)
        )
    return records


def parse_hmog_sensor_files(accelerometer, gyroscope, magnetometer, user_id,
                            session=None) -> list[MotionRecord]:
    """Build motion records from one HMOG session's raw sensor exports.

    The raw files are header-less with columns
    ``Systime, EventTime, ActivityID, X, Y, Z, Phone_orientation``. Rows are
    aligned by position and truncated to the shortest file; the
    accelerometer ``Systime`` becomes the snapshot timestamp.
    """
    tables = [read_raw_table(src, has_header=False)
              for src in (accelerometer, gyroscope, magnetometer)]
    n = min(len(t.rows) for t in tables)
    records = []
    for i in range(n):
        values = []
        for t, prefix in zip(tables, ("acc", "gyro", "mag")):
            row = t.rows[i]
            if len(row) < 6:
                raise IngestError("sensor row has fewer than 6 cells", row=i + 1)
            values += [_number(row[k], i + 1, f"{prefix}_{axis}")
                       for k, axis in zip((3, 4, 5), "xyz")]
        if not all(math.isfinite(v) for v in values):
            raise IngestError("non-finite sensor value", row=i + 1)
        stamp = _number(tables[0].rows[i][0], i + 1, "Systime")
        records.append(MotionRecord(str(user_id), *values, timestamp=stamp,
                                    session=None if session is None else str(session)))
    return records


# -- canonical format -------------------------------------------------------


def _render(value: float) -> str:
    # repr is the shortest string that round-trips a double.
    return repr(float(value))


def write_canonical(dataset: FusedDataset) -> bytes:
    """Render a dataset as canonical CSV (UTF-8, ``\\n`` newlines)."""
    rows = [
        (s.user_id,) + tuple(_render(v) for v in s.values) for s in dataset.samples
    ]
    return write_raw_table(RawTable(CANONICAL_HEADER, tuple(rows)))


def read_canonical(source, roster=None) -> FusedDataset:
    """Parse canonical CSV back into a :class:`FusedDataset`.

    If ``roster`` is given, any user id outside it is an error.
    """
    text = _read_text(source)
    if not text.strip():
        raise IngestError("empty input")
    table = read_raw_table(text)
    if table.header != CANONICAL_HEADER:
        if len(table.header) != len(CANONICAL_HEADER):
            raise IngestError(
                f"expected {len(CANONICAL_HEADER)} columns, found {len(table.header)}"
            )
        raise IngestError("header does not match the canonical column order")
    allowed = None if roster is None else {str(u) for u in roster}
    samples = []
    for i, row in enumerate(table.rows, start=1):
        user = row[0]
        if allowed is not None and user not in allowed:
            raise IngestError(f"unknown user id {user!r}", row=i, column="user_id")
        values = [_number(c, i, name) for c, name in zip(row[1:], CANONICAL_HEADER[1:])]
        if not all(map(math.isfinite, values)):
            raise IngestError("non-finite feature value", row=i)
        sample = FusedSample(user, values[:N_TOUCH], values[N_TOUCH:N_TOUCH + N_MOTION])
        problems = validate_sample(sample)
        if problems:
            raise IngestError("; ".join(problems), row=i)
        samples.append(sample)
    return FusedDataset(tuple(samples))
