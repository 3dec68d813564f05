import json

import numpy as np
import pytest

from netepi.core import EventKind
from netepi.simulator import make_rng, synthesize_missingness
from netepi.storage import (
    BundleError,
    atomic_write,
    bundle_variant,
    chain_from_csv,
    chain_to_csv,
    read_bundle,
    trace_from_csv,
    write_bundle,
    write_manifest,
)

from conftest import er_run


@pytest.fixture
def partial():
    g0, trace = er_run(3, n=30, t_max=20.0)
    return synthesize_missingness(g0, trace, 20.0, 0.5, 7.0, make_rng(1))


def test_bundle_round_trip(tmp_path, partial):
    write_bundle(tmp_path, partial, meta={"variant": "sir-closed"}, truth=partial.truth)
    back = read_bundle(tmp_path)
    assert back.g0 == partial.g0
    assert back.events == partial.events
    assert np.array_equal(back.report_times, partial.report_times)
    assert np.array_equal(back.reports, partial.reports)
    assert back.t_max == partial.t_max
    assert {int(k): v for k, v in back.truth.items()} == partial.truth
    assert bundle_variant(tmp_path) == "sir-closed"


def test_external_labels_round_trip():
    text = "time,kind,p1,p2,external\n1.0,INF,2,,1\n2.0,ON,0,1,\n3.0,INF,0,,0\n"
    tr = trace_from_csv(text)
    assert tr.external == (True, False)
    assert [e.kind for e in tr] == [EventKind.INFECTION, EventKind.LINK_ON, EventKind.INFECTION]
    with pytest.raises(BundleError):
        trace_from_csv("time,kind,p1,p2,external\n1.0,INF,2,,1\n3.0,INF,0,,\n")


def test_chain_round_trip_is_exact():
    draws = make_rng(0).gamma(2.0, 0.1, size=(7, 3))
    names, back = chain_from_csv(chain_to_csv(("a", "b", "c"), draws))
    assert names == ("a", "b", "c") and np.array_equal(back, draws)


def test_manifest_is_deterministic(tmp_path):
    out = tmp_path / "x.csv"
    atomic_write(out, "a\n1\n")
    first = write_manifest(tmp_path, "demo", {"k": 1}, [3], [out]).read_text()
    second = write_manifest(tmp_path, "demo", {"k": 1}, [3], [out]).read_text()
    assert first == second
    m = json.loads(first)
    assert set(m) == {"command", "config", "config_hash", "seeds", "outputs"}
    assert list(m["outputs"]) == ["x.csv"]


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


@pytest.mark.parametrize(
    "name,text",
    [
        ("meta.json", "{not json"),
        ("trace.csv", "t,k\n"),
        ("trace.csv", "time,kind,p1,p2,external\n1.0,XYZ,0,,\n"),
        ("initial.json", '{"statuses": "SQ", "edges": []}'),
        ("reports.csv", "time,p0\n0,1\n"),
    ],
)
def test_malformed_bundles_are_rejected(tmp_path, partial, name, text):
    write_bundle(tmp_path, partial)
    (tmp_path / name).write_text(text)
    with pytest.raises(BundleError):
        read_bundle(tmp_path)


def test_missing_files_are_bundle_errors(tmp_path):
    with pytest.raises(BundleError):
        read_bundle(tmp_path)
    with pytest.raises(BundleError):
        bundle_variant(tmp_path / "nowhere")
