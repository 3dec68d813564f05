"""Plain-text file formats and atomic output.

A *bundle* is a directory holding one observation period:

``initial.json``
    ``{"time": 0.0, "statuses": "SSI...", "edges": [[a, b], ...]}``
``trace.csv``
    columns ``time,kind,p1,p2,external``; ``kind`` is ``INF``, ``REC``,
    ``ON`` or ``OFF``; ``p2`` is empty for epidemic events; ``external`` is
    ``1``/``0`` on infections of open-population data and empty otherwise.
``reports.csv`` (optional)
    column ``time`` then one 0/1 column per person, ``p0`` to ``p{N-1}``.
``meta.json``
    ``t_max``, ``open_population``, ``variant`` and any provenance.
``truth.json`` (optional)
    simulation parameters and the removed recovery times.

Chains are CSV files with one column per parameter and one row per retained
draw. Floats are written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import DiseaseStatus, Event, EventKind, EventTrace, ProcessState
from .simulator import PartialData

OUTPUT_ROOT_ENV = "NETEPI_OUTPUT_ROOT"
STATUS_CHARS = "SIR"


class BundleError(ValueError):
    pass


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary sibling file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow(["" if v is None else v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- states and traces ------------------------------------------------------


def state_to_json(state: ProcessState) -> dict:
    return {
        "time": state.time,
        "statuses": "".join(STATUS_CHARS[int(s)] for s in state.statuses),
        "edges": sorted([a, b] for a, b in state.edges),
    }


def state_from_json(obj: dict) -> ProcessState:
    try:
        statuses = tuple(DiseaseStatus(STATUS_CHARS.index(c)) for c in obj["statuses"])
    except ValueError as exc:
        raise BundleError(f"bad status character in initial state: {exc}") from exc
    return ProcessState(float(obj.get("time", 0.0)), statuses, frozenset(tuple(e) for e in obj["edges"]))


def trace_to_csv(trace: EventTrace) -> str:
    labels = iter(trace.external) if trace.external is not None else None
    rows = []
    for e in trace:
        ext = None
        if e.kind is EventKind.INFECTION and labels is not None:
            ext = next(labels)
        rows.append([e.time, e.kind.value, e.p1, e.p2, ext])
    return csv_text(("time", "kind", "p1", "p2", "external"), rows)


def trace_from_csv(text: str) -> EventTrace:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or reader.fieldnames[:4] != ["time", "kind", "p1", "p2"]:
        raise BundleError("trace file must start with columns time,kind,p1,p2")
    events, labels = [], []
    for k, row in enumerate(reader, start=2):
        try:
            kind = EventKind(row["kind"])
            p2 = int(row["p2"]) if row["p2"] else None
            events.append(Event(float(row["time"]), kind, int(row["p1"]), p2))
        except ValueError as exc:
            raise BundleError(f"trace line {k}: {exc}") from exc
        if kind is EventKind.INFECTION and row.get("external"):
            labels.append(row["external"] == "1")
    n_inf = sum(e.kind is EventKind.INFECTION for e in events)
    if labels and len(labels) != n_inf:
        raise BundleError("external labels must be given for all infections or none")
    return EventTrace(tuple(events), tuple(labels) if labels else None)


def reports_to_csv(times: np.ndarray, reports: np.ndarray) -> str:
    n = reports.shape[1]
    rows = [[t, *row.astype(int).tolist()] for t, row in zip(times, reports)]
    return csv_text(["time", *(f"p{p}" for p in range(n))], rows)


def reports_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "time":
        raise BundleError("reports file must start with a time column")
    body = np.array([[float(x) for x in r] for r in rows[1:]]) if len(rows) > 1 else np.zeros((0, 1))
    return body[:, 0], body[:, 1:].astype(bool)


# -- bundles --------------------------------------------------------------------


def write_bundle(directory, partial: PartialData, meta: dict | None = None, truth: dict | None = None) -> list[Path]:
    d = Path(directory)
    written = []

    def put(name: str, text: str) -> None:
        atomic_write(d / name, text)
        written.append(d / name)

    put("initial.json", json.dumps(state_to_json(partial.g0), sort_keys=True) + "\n")
    put("trace.csv", trace_to_csv(partial.events))
    if partial.reports is not None and len(partial.report_times):
        put("reports.csv", reports_to_csv(partial.report_times, partial.reports))
    info = {"t_max": partial.t_max, "open_population": partial.open_population, "variant": "sir"}
    info.update(meta or {})
    put("meta.json", json.dumps(info, indent=2, sort_keys=True, default=_json_default) + "\n")
    if truth is not None:
        put("truth.json", json.dumps(truth, indent=2, sort_keys=True, default=_json_default) + "\n")
    return written


def read_bundle(directory) -> PartialData:
    d = Path(directory)
    try:
        meta = read_json(d / "meta.json")
        g0 = state_from_json(read_json(d / "initial.json"))
        trace = trace_from_csv((d / "trace.csv").read_text())
    except FileNotFoundError as exc:
        raise BundleError(f"incomplete bundle {d}: {exc.filename} missing") from exc
    except (KeyError, json.JSONDecodeError) as exc:
        raise BundleError(f"malformed bundle {d}: {exc}") from exc
    if (d / "reports.csv").exists():
        times, reports = reports_from_csv((d / "reports.csv").read_text())
        if reports.shape[1] != g0.n:
            raise BundleError(f"reports cover {reports.shape[1]} persons, population is {g0.n}")
    else:
        times, reports = np.zeros(0), np.zeros((0, g0.n), dtype=bool)
    truth = read_json(d / "truth.json") if (d / "truth.json").exists() else {}
    return PartialData(
        g0=g0,
        events=trace,
        report_times=times,
        reports=reports,
        t_max=float(meta["t_max"]),
        truth=truth,
        open_population=bool(meta.get("open_population", trace.external is not None)),
    )


def bundle_variant(directory) -> str:
    try:
        return read_json(Path(directory) / "meta.json").get("variant", "sir")
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read bundle metadata in {directory}: {exc}") from exc


# -- chains and manifests ----------------------------------------------------------


def chain_to_csv(names, draws: np.ndarray) -> str:
    return csv_text(names, draws.tolist())


def chain_from_csv(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise BundleError("empty chain file")
    names = tuple(rows[0])
    draws = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    return names, draws.reshape(-1, len(names))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(directory, command: str, config: dict, seeds, outputs: Iterable) -> Path:
    """Record what was run and digests of everything it wrote.

    No timestamps are included, so identical runs give identical manifests.
    """
    d = Path(directory)
    files = {}
    for p in outputs:
        p = Path(p)
        files[os.path.relpath(p, d)] = sha256_file(p)
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seeds": list(seeds),
        "outputs": files,
    }
    path = d / "manifest.json"
    write_json(path, manifest)
    return path
