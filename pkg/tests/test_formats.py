import numpy as np
import pytest

from dpplearn import formats, learn
from dpplearn.errors import ParseError
from dpplearn.formats import TraceValidationError
from dpplearn.learn import FitConfig
from dpplearn.model import ObservationData

from conftest import random_data, random_pd


def test_kernel_round_trip_is_exact(tmp_path, rng):
    L = random_pd(rng, 7)
    p = tmp_path / "k.txt"
    formats.write_kernel(p, L)
    np.testing.assert_array_equal(formats.read_kernel(p), L)


@pytest.mark.parametrize(
    "text, line",
    [
        ("oops\n1\n", 1),
        ("dpp-kernel v1 N=2\n1 0\n", 2),
        ("dpp-kernel v1 N=2\n1 0\n0\n", 3),
        ("dpp-kernel v1 N=2\n1 x\n0 1\n", 2),
        ("dpp-kernel v1 N=1\nnan\n", 1),
    ],
)
def test_kernel_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as info:
        formats.read_kernel(p)
    assert info.value.line == line
    assert str(p) in str(info.value)


def test_subsets_round_trip(tmp_path, rng):
    d = random_data(rng, 6, 40, p=0.3)
    p = tmp_path / "s.txt"
    formats.write_subsets(p, d, {"seed": 4, "sampler": "exact"})
    back, meta = formats.read_subsets(p)
    assert back == d
    assert meta == {"seed": "4", "sampler": "exact"}
    # two metadata lines and the header precede the first subset
    assert back.lines[0] == 4


def test_subsets_blank_line_is_empty_subset(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("N=3\n1 3\n\n2\n")
    d, _ = formats.read_subsets(p)
    assert d.as_lists() == [[0, 2], [], [1]]
    assert d.lines == (2, 3, 4)
    dropped, _ = formats.read_subsets(p, drop_empty=True)
    assert dropped.as_lists() == [[0, 2], [1]]
    assert dropped.lines == (2, 4)


def test_empty_subset_written_as_blank_line(tmp_path):
    p = tmp_path / "s.txt"
    formats.write_subsets(p, ObservationData.from_lists(2, [[], [0, 1]]))
    assert p.read_text() == "N=2\n\n1 2\n"


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 2\n", 1),
        ("N=2\n3\n", 2),
        ("N=2\n1 1\n", 2),
        ("N=2\n1 a\n", 2),
        ("# c\nN=0\n", 2),
        ("N=2\n", 1),
    ],
)
def test_subsets_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as info:
        formats.read_subsets(p)
    assert info.value.line == line


def _fit_trace(rng):
    L = random_pd(rng, 5)
    d = random_data(rng, 5, 30)
    return learn.picard_fit(L, d, FitConfig(max_iter=15))[1]


def test_trace_round_trip(tmp_path, rng):
    trace = _fit_trace(rng)
    p = tmp_path / "t.csv"
    formats.write_trace(p, trace, {"a": 1.0}, "0.1.0", 0.5, extra={"note": "x"})
    rows = formats.read_trace(p)
    assert [r["iter"] for r in rows] == [r.iter for r in trace.records]
    assert [r["loglik"] for r in rows] == [r.loglik for r in trace.records]
    side = formats.read_sidecar(p)
    assert side["status"] == trace.status
    assert side["final_loglik"] == trace.final_loglik
    assert side["spec"] == {"a": 1.0} and side["note"] == "x"
    assert "stationarity_residual" in side["diagnostics"]


def _write_rows(p, rows):
    lines = [",".join(formats.TRACE_HEADER)] + [",".join(map(str, r)) for r in rows]
    p.write_text("\n".join(lines) + "\n")


@pytest.mark.parametrize(
    "rows, line",
    [
        ([(1, 0.1, -5, -1, 1, 0), (3, 0.2, -4, -1, 1, 0)], 3),
        ([(1, 0.2, -5, -1, 1, 0), (2, 0.1, -4, -1, 1, 0)], 3),
        ([(1, 0.1, -4, -1, 1, 0), (2, 0.2, -5, -1, 1, 0)], 3),
        ([(1, 0.1, -4)], 2),
    ],
)
def test_trace_validation_rejects(tmp_path, rows, line):
    p = tmp_path / "t.csv"
    _write_rows(p, rows)
    with pytest.raises(TraceValidationError) as info:
        formats.read_trace(p)
    assert info.value.line == line


def test_trace_decrease_allowed_above_unit_step(tmp_path):
    p = tmp_path / "t.csv"
    _write_rows(p, [(1, 0.1, -4, -1, 5, 0), (2, 0.2, -5, -1, 5, 0)])
    assert len(formats.read_trace(p)) == 2


def test_trace_header_checked(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("iter,loglik\n")
    with pytest.raises(TraceValidationError):
        formats.read_trace(p)
