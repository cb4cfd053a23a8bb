import numpy as np
import pandas as pd
import pytest

from pwcet.errors import EmptyInput, NegativeValue, NonFinite, TraceFormatError
from pwcet.trace_io import format_samples, load_trace, parse_trace, write_samples


def test_comments_and_blank_lines_are_skipped():
    trace = parse_trace(["# recorded on board 3", "", "1.5", "  2.25  ", "# tail", "3"])
    assert trace.values.tolist() == [1.5, 2.25, 3.0]
    assert trace.unit == "s"


def test_unit_header_converts_to_seconds():
    trace = parse_trace(["# unit: ms", "1500", "250"])
    assert trace.unit == "ms"
    assert trace.values == pytest.approx([1.5, 0.25], rel=1e-15)


def test_file_order_is_kept():
    trace = parse_trace(["3", "1", "2"])
    assert trace.values.tolist() == [3.0, 1.0, 2.0]
    assert trace.head(2).tolist() == [3.0, 1.0]
    assert trace.head(None).tolist() == [3.0, 1.0, 2.0]


def test_unit_after_values_is_rejected():
    with pytest.raises(TraceFormatError) as info:
        parse_trace(["1.0", "# unit: ns"])
    assert info.value.line == 2


def test_unknown_unit():
    with pytest.raises(TraceFormatError, match="unknown unit"):
        parse_trace(["# unit: minutes", "1"])


def test_not_a_number():
    with pytest.raises(TraceFormatError, match="line 2"):
        parse_trace(["1.0", "fast"])


def test_negative_value_names_line():
    lines = ["# header", "1", "2", "3", "4", "5", "-0.5", "6"]
    with pytest.raises(NegativeValue, match="line 7"):
        parse_trace(lines)


@pytest.mark.parametrize("bad", ["nan", "inf", "-inf"])
def test_non_finite(bad):
    with pytest.raises(NonFinite):
        parse_trace(["1", bad])


def test_empty_trace():
    with pytest.raises(EmptyInput, match="empty trace"):
        parse_trace(["# only a comment", ""], "t.txt")


def test_load_text_file(write_trace):
    path = write_trace(["# unit: us", "10", "20"])
    trace = load_trace(path)
    assert trace.values == pytest.approx([1e-5, 2e-5], rel=1e-15)
    assert trace.source == str(path)


def test_load_parquet(tmp_path):
    pytest.importorskip("pyarrow")
    path = tmp_path / "trace.parquet"
    pd.DataFrame({"task": ["a", "b", "c"], "time": [3.0, 1.0, 2.0], "cpu": [0, 1, 0]}).to_parquet(path)
    assert load_trace(path).values.tolist() == [3.0, 1.0, 2.0]
    assert load_trace(path, column="cpu").values.tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(TraceFormatError, match="no column"):
        load_trace(path, column="latency")


@pytest.mark.parametrize("values, exc", [([1.0, -2.0], NegativeValue), ([1.0, np.nan], NonFinite), ([], EmptyInput)])
def test_parquet_validation(tmp_path, values, exc):
    pytest.importorskip("pyarrow")
    path = tmp_path / "bad.parquet"
    pd.DataFrame({"time": pd.Series(values, dtype="float64")}).to_parquet(path)
    with pytest.raises(exc):
        load_trace(path)


def test_written_samples_parse_back_exactly(tmp_path, rng):
    values = rng.weibull(4.0, 500) * 80.0
    path = tmp_path / "out" / "samples.txt"
    write_samples(path, values)
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n") and not text.endswith("\n\n")
    assert np.array_equal(load_trace(path).values, values)
    assert [p.name for p in path.parent.iterdir()] == ["samples.txt"]


def test_format_uses_17_digits():
    assert format_samples([0.1, 2.0]) == "0.10000000000000001\n2\n"


def test_invalid_utf8_is_a_format_error(tmp_path):
    path = tmp_path / "latin1.txt"
    path.write_bytes(b"1.5\n2.5\n\xff\xfe3.5\n")
    with pytest.raises(TraceFormatError, match="not UTF-8"):
        load_trace(path)


def test_corrupt_parquet_is_a_format_error(tmp_path):
    pytest.importorskip("pyarrow")
    path = tmp_path / "broken.parquet"
    path.write_bytes(b"PAR1 this is not a parquet footer")
    with pytest.raises(TraceFormatError, match="not a readable parquet file"):
        load_trace(path)
