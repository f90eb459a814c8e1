"""Core type behavior: kind inference, timestamps, submission validation."""

from datetime import timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from lineatrace.errors import ErrorCode, RunValidationError
from lineatrace.model import (
    ColumnSample,
    PointerKind,
    format_ts,
    infer_kind,
    parse_ts,
    validate_run_record,
)

from conftest import BASE, dt, run_payload, ts


class TestKindInference:
    @pytest.mark.parametrize(
        "name,kind",
        [
            ("model.joblib", PointerKind.MODEL),
            ("weights.pt", PointerKind.MODEL),
            ("net.onnx", PointerKind.MODEL),
            ("clf.pkl", PointerKind.MODEL),
            ("rows.csv", PointerKind.DATA),
            ("rows.parquet", PointerKind.DATA),
            ("rows.jsonl", PointerKind.DATA),
            ("http://api.internal/predict", PointerKind.ENDPOINT),
            ("https://api.internal/predict", PointerKind.ENDPOINT),
            ("notes.txt", PointerKind.UNKNOWN),
            ("noextension", PointerKind.UNKNOWN),
            (".csv", PointerKind.UNKNOWN),
            ("archive.csv.bak", PointerKind.UNKNOWN),
            ("dir/sub/rows.csv", PointerKind.DATA),
            ("HTTPS://upper.case", PointerKind.UNKNOWN),
        ],
    )
    def test_extension_table(self, name, kind):
        assert infer_kind(name) is kind

    @given(st.text(max_size=40))
    def test_pure_function_of_name(self, name):
        assert infer_kind(name) is infer_kind(name)
        assert infer_kind(name) in set(PointerKind)


class TestTimestamps:
    def test_fixed_width_utc_microseconds(self):
        assert format_ts(BASE) == "2026-01-01T00:00:00.000000Z"
        assert format_ts(dt(hours=1) + timedelta(microseconds=7)) == "2026-01-01T01:00:00.000007Z"

    def test_round_trip(self):
        moment = dt(hours=3) + timedelta(microseconds=123456)
        assert parse_ts(format_ts(moment)) == moment

    def test_parse_requires_exact_shape(self):
        with pytest.raises(ValueError):
            parse_ts("2026-01-01T00:00:00Z")

    @given(st.datetimes(min_value=BASE.replace(tzinfo=None), max_value=BASE.replace(tzinfo=None) + timedelta(days=3650)))
    def test_round_trip_any_microsecond_instant(self, naive):
        moment = naive.replace(tzinfo=timezone.utc)
        assert parse_ts(format_ts(moment)) == moment


class TestValidateRunRecord:
    KNOWN = ("etl", "train")

    def _validate(self, payload, received=None):
        return validate_run_record(payload, self.KNOWN, received or dt(hours=1))

    def test_normalizes_and_infers_kinds(self):
        record = self._validate(
            run_payload("etl", ts(0), ts(0), inputs=["  raw.csv "], outputs=[" features.csv"])
        )
        assert record.component_name == "etl"
        assert [d.name for d in record.inputs] == ["raw.csv"]
        assert [(d.name, d.kind) for d in record.outputs] == [("features.csv", PointerKind.DATA)]
        assert record.start_time == record.end_time == dt(0)

    def test_unknown_component(self):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("ghost", ts(0), ts(1), inputs=["a.csv"]))
        assert err.value.violations[0][0] is ErrorCode.UNKNOWN_COMPONENT

    def test_time_inversion(self):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("etl", ts(5), ts(0), inputs=["a.csv"]))
        assert {code for code, _ in err.value.violations} == {ErrorCode.TIME_INVERSION}

    def test_empty_inputs_and_outputs(self):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("etl", ts(0), ts(1)))
        assert {code for code, _ in err.value.violations} == {ErrorCode.EMPTY_OUTPUT_AND_INPUT}

    def test_output_shadowing_input_is_rejected(self):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("etl", ts(0), ts(1), inputs=["x.csv"], outputs=["x.csv"]))
        assert {code for code, _ in err.value.violations} == {ErrorCode.IO_OVERLAP}

    def test_all_violations_reported_together(self):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("ghost", ts(5), ts(0)))
        codes = {code for code, _ in err.value.violations}
        assert codes == {
            ErrorCode.UNKNOWN_COMPONENT,
            ErrorCode.TIME_INVERSION,
            ErrorCode.EMPTY_OUTPUT_AND_INPUT,
        }

    def test_future_timestamps_clamped_with_note(self):
        received = dt(hours=1)
        record = self._validate(
            run_payload("etl", ts(hours=2), ts(hours=3), inputs=["a.csv"], notes="nightly"),
            received=received,
        )
        assert record.start_time == record.end_time == received
        assert "nightly" in record.notes
        assert "clamped" in record.notes

    def test_small_future_skew_is_kept(self):
        received = dt(hours=1)
        start = dt(hours=1) + timedelta(minutes=4)
        record = self._validate(
            run_payload("etl", format_ts(start), format_ts(start), inputs=["a.csv"]), received=received
        )
        assert record.start_time == start
        assert "clamped" not in record.notes

    def test_clamping_cannot_invert_times(self):
        received = dt(hours=1)
        record = self._validate(
            run_payload("etl", ts(hours=12), ts(hours=10), inputs=["a.csv"]), received=received
        )
        assert record.start_time == record.end_time == received

    def test_pinned_versions(self):
        record = self._validate(
            run_payload("etl", ts(0), ts(1), inputs=[{"name": "a.csv", "version": 2}, "b.csv"], outputs=["c.csv"])
        )
        assert [(d.name, d.pinned_version) for d in record.inputs] == [("a.csv", 2), ("b.csv", None)]

    @pytest.mark.parametrize("bad", [0, -1, "latest", 1.5, True])
    def test_bad_pin_rejected(self, bad):
        with pytest.raises(RunValidationError) as err:
            self._validate(run_payload("etl", ts(0), ts(1), inputs=[{"name": "a.csv", "version": bad}]))
        assert any(code is ErrorCode.VALIDATION for code, _ in err.value.violations)

    def test_duplicate_declarations_collapse(self):
        record = self._validate(
            run_payload("etl", ts(0), ts(1), inputs=["a.csv", "a.csv"], outputs=["b.csv", "b.csv"])
        )
        assert len(record.inputs) == 1 and len(record.outputs) == 1

    def test_explicit_kind_override(self):
        record = self._validate(
            run_payload("etl", ts(0), ts(1), outputs=[{"name": "scores.bin", "kind": "model"}])
        )
        assert record.outputs[0].kind is PointerKind.MODEL
        with pytest.raises(RunValidationError):
            self._validate(run_payload("etl", ts(0), ts(1), outputs=[{"name": "x", "kind": "blob"}]))

    def test_samples_normalized(self):
        record = self._validate(
            run_payload(
                "etl", ts(0), ts(1), inputs=["a.csv"],
                samples=[{"column": "f1", "values": [1, None, 2.5]}],
            )
        )
        sample = record.samples[0]
        assert sample.values == (1.0, None, 2.5)
        assert sample.captured_at == dt(hours=1)
        assert sample.missing_count() == 1 and sample.numeric_values() == [1.0, 2.5]

    def test_non_numeric_sample_rejected(self):
        with pytest.raises(RunValidationError):
            self._validate(
                run_payload("etl", ts(0), ts(1), inputs=["a.csv"], samples=[{"column": "f1", "values": ["x"]}])
            )

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), True])
    def test_non_finite_metrics_rejected(self, value):
        with pytest.raises(RunValidationError):
            self._validate(run_payload("etl", ts(0), ts(1), inputs=["a.csv"], metrics={"m": value}))

    def test_metrics_coerced_to_float(self):
        record = self._validate(run_payload("etl", ts(0), ts(1), inputs=["a.csv"], metrics={"m": 1}))
        assert record.metrics == {"m": 1.0}

    def test_missing_timestamp_reported(self):
        with pytest.raises(RunValidationError) as err:
            validate_run_record({"component": "etl", "inputs": ["a.csv"]}, self.KNOWN, dt(0))
        assert sum(1 for code, _ in err.value.violations if code is ErrorCode.VALIDATION) == 2


class TestColumnSample:
    def test_counts_missing_separately(self):
        sample = ColumnSample(column="f", values=(None, 1.0, None))
        assert sample.missing_count() == 2
        assert sample.numeric_values() == [1.0]

    def test_empty_values_allowed(self):
        assert ColumnSample(column="f", values=()).numeric_values() == []
