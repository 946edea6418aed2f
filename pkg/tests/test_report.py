import csv
import json
import math

import jsonschema
import numpy as np
import pytest

from sdiqrng.errors import FormatError, OutputError
from sdiqrng.extractor import ExtractorSpec
from sdiqrng.protocol import ProtocolConfig, run_protocol, secure_rate
from sdiqrng.report import (
    BLOCK_COLUMNS,
    REPORT_SCHEMA,
    emit_report,
    load_report,
    report_dict,
    write_csv,
)
from sdiqrng.sanity import sanity_tests
from sdiqrng.states import GaussianState
from sdiqrng.sweeps import experiment_partition


@pytest.fixture(scope="module")
def run():
    cfg = ProtocolConfig(
        m=3 * 2**16,
        partition=experiment_partition(5),
        recalibration_block=2**16,
        seed=4,
        extractor=ExtractorSpec(n=1000, b=5, matrix_seed=2),
    )
    return run_protocol(cfg, GaussianState.empirical(0.677), source_seed=9)


def test_report_dict_matches_schema(run):
    data = report_dict(run)
    jsonschema.validate(data, REPORT_SCHEMA)
    assert len(data["blocks"]) == 3
    assert data["estimator"] == "bayesian"
    assert data["sanity"] == []
    json.dumps(data)


def test_reported_rate_recomputes(run):
    data = report_dict(run)
    for b in data["blocks"]:
        want = secure_rate(b["length"], b["n_q"], b["h_low"], b["t_bits"])
        assert b["r_sec"] == pytest.approx(want, rel=1e-12, abs=1e-15)
    weights = np.array([b["length"] for b in data["blocks"]], dtype=float)
    rates = np.array([b["r_sec"] for b in data["blocks"]])
    assert data["r_sec"] == pytest.approx(np.dot(weights, rates) / weights.sum(), rel=1e-12)
    assert data["t_bits"] == sum(b["t_bits"] for b in data["blocks"])


def test_emit_and_load_roundtrip(run, tmp_path):
    sanity = sanity_tests(run.output.packed, run.output.n_bits)
    written = emit_report(run, tmp_path / "run.json", sanity=sanity,
                          autocorrelation=[1.0, 0.01, -0.002],
                          bits_path=tmp_path / "bits.bin")
    assert set(written) == {"report", "blocks", "autocorrelation", "bits"}
    data = load_report(written["report"])
    assert data == report_dict(run, sanity)
    assert [s["name"] for s in data["sanity"]] == [s.name for s in sanity]

    with written["blocks"].open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == BLOCK_COLUMNS
    assert len(rows) == 1 + len(run.blocks)
    col = BLOCK_COLUMNS.index("h_low")
    assert [float(r[col]) for r in rows[1:]] == [b.entropy.h_low for b in run.blocks]

    with written["autocorrelation"].open() as fh:
        acf = list(csv.reader(fh))
    assert acf[0] == ["lag", "value"]
    assert [float(v) for _, v in acf[1:]] == [1.0, 0.01, -0.002]

    assert written["bits"].read_bytes() == run.output.packed


def test_csv_floats_roundtrip_exactly(tmp_path):
    values = [math.pi, 1 / 3, 1e-300, 7.000000000000001e-3]
    path = write_csv(tmp_path / "x.csv", ("i", "v"), enumerate(values))
    with path.open() as fh:
        rows = list(csv.reader(fh))[1:]
    assert [float(v) for _, v in rows] == values
    assert [int(i) for i, _ in rows] == list(range(len(values)))


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        load_report(path)


def test_load_rejects_schema_violation(run, tmp_path):
    data = report_dict(run)
    data["blocks"][0]["c"] = 1.5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(FormatError):
        load_report(path)


def test_unwritable_paths(run, tmp_path):
    missing = tmp_path / "no" / "such" / "dir"
    with pytest.raises(OutputError):
        emit_report(run, missing / "run.json")
    with pytest.raises(OutputError):
        write_csv(missing / "x.csv", ("a",), [(1,)])
    with pytest.raises(OutputError):
        emit_report(run, tmp_path / "run.json", bits_path=missing / "bits.bin")
