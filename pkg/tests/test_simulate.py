"""Simulator: determinism contract and fault injection outcomes."""

import pytest

from lineatrace import DomainError, ErrorCode
from lineatrace.simulate import Fault, column_sample, metric_value, parse_fault, simulate, stage_artifact
from lineatrace.store import JOURNAL_NAME, Store

from oracles import ks_oracle


def journal_bytes(directory) -> bytes:
    return (directory / JOURNAL_NAME).read_bytes()


def stage_of(run_index: int, components: int = 3) -> int:
    return (run_index - 1) % components


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        faults = (parse_fault("drift_shift:run=18"), parse_fault("metric_drop:run=15"))
        a = simulate(tmp_path / "a", seed=7, runs=20, faults=faults)
        b = simulate(tmp_path / "b", seed=7, runs=20, faults=faults)
        assert journal_bytes(tmp_path / "a") == journal_bytes(tmp_path / "b")
        assert a.journal_bytes == b.journal_bytes > 0

    def test_different_seed_differs(self, tmp_path):
        simulate(tmp_path / "a", seed=7, runs=10)
        simulate(tmp_path / "b", seed=8, runs=10)
        assert journal_bytes(tmp_path / "a") != journal_bytes(tmp_path / "b")

    def test_nonempty_target_rejected(self, tmp_path):
        simulate(tmp_path / "a", seed=1, runs=3)
        with pytest.raises(DomainError) as err:
            simulate(tmp_path / "a", seed=1, runs=3)
        assert err.value.code is ErrorCode.NONEMPTY_TARGET

    def test_report_counts(self, tmp_path):
        report = simulate(tmp_path / "a", seed=3, runs=9, components=3)
        assert (report.runs, report.components, report.alerts_fired) == (9, 3, 0)


class TestDriftFault:
    def test_shift_is_the_unique_drift_fail(self, tmp_path):
        # Run 18 is stage2's final run, so no later window sees the shifted sample.
        simulate(tmp_path / "a", seed=7, runs=20, faults=(parse_fault("drift_shift:run=18"),))
        with Store(tmp_path / "a") as store:
            fails = [
                (run.run_id, t)
                for run in store.snapshot().runs.values()
                for t in run.trigger_results
                if t.check_name == "drift" and t.status.value == "FAIL"
            ]
        assert [run_id for run_id, _ in fails] == [18]

    def test_fail_metric_matches_ks_oracle(self, tmp_path):
        simulate(tmp_path / "a", seed=7, runs=20, faults=(parse_fault("drift_shift:run=18"),))
        pool = [v for prior in (3, 6, 9, 12, 15) for v in column_sample(7, prior, "value")]
        expected = ks_oracle(column_sample(7, 18, "value", shifted=True), pool)
        with Store(tmp_path / "a") as store:
            result = next(t for t in store.get_run(18).trigger_results if t.check_name == "drift")
        assert result.metric_value == pytest.approx(expected, abs=1e-12)
        assert expected > 0.1

    def test_stable_metric_matches_ks_oracle(self, tmp_path):
        simulate(tmp_path / "a", seed=7, runs=20)
        pool = [v for prior in (3, 6, 9) for v in column_sample(7, prior, "value")]
        expected = ks_oracle(column_sample(7, 12, "value"), pool)
        with Store(tmp_path / "a") as store:
            result = next(t for t in store.get_run(12).trigger_results if t.check_name == "drift")
        assert result.status.value == "PASS"
        assert result.metric_value == pytest.approx(expected, abs=1e-12)
        assert expected < 0.1


class TestOtherFaults:
    def test_null_spike_trips_only_null_check(self, tmp_path):
        simulate(tmp_path / "a", seed=5, runs=12, faults=(parse_fault("null_spike:run=10"),))
        with Store(tmp_path / "a") as store:
            by_check = {t.check_name: t for t in store.get_run(10).trigger_results}
            assert by_check["null_fraction"].status.value == "FAIL"
            assert by_check["null_fraction"].metric_value == pytest.approx(20 / 60)
            assert by_check["drift"].status.value == "PASS"
            assert by_check["outliers"].status.value == "PASS"

    def test_stale_age_surfaces_in_stale_components(self, tmp_path):
        from lineatrace.queries import stale_components

        # Run 20 is stage1's final run; a 31-day jump ages its stage0 input.
        simulate(tmp_path / "a", seed=5, runs=20, faults=(parse_fault("stale_age:run=20"),))
        with Store(tmp_path / "a") as store:
            listed = stale_components(store)
        assert [name for name, _ in listed] == ["stage1"]
        codes = {r.code.value for _, v in listed for r in v.reasons}
        assert codes == {"AGED_DEPENDENCY"}

    def test_pin_stale_yields_not_freshest(self, tmp_path):
        simulate(tmp_path / "a", seed=5, runs=12, faults=(parse_fault("pin_stale:run=8"),))
        with Store(tmp_path / "a") as store:
            run = store.get_run(8)
            assert run.inputs[0].version == 1
            assert [r.code.value for r in run.stale.reasons] == ["NOT_FRESHEST"]

    def test_metric_drop_fires_one_alert(self, tmp_path):
        report = simulate(tmp_path / "a", seed=5, runs=20, faults=(parse_fault("metric_drop:run=18"),))
        assert report.alerts_fired == 1
        with Store(tmp_path / "a") as store:
            alert = store.alerts()[0]
        assert alert.component == "stage2"
        assert alert.run_ids == (12, 15, 18)
        window = (metric_value(5, 12), metric_value(5, 15), 0.5)
        assert alert.value == pytest.approx(sum(window) / 3)

    def test_fault_beyond_run_count_rejected(self, tmp_path):
        with pytest.raises(DomainError) as err:
            simulate(tmp_path / "a", seed=1, runs=5, faults=(parse_fault("drift_shift:run=9"),))
        assert err.value.code is ErrorCode.BAD_REQUEST


class TestFaultParsing:
    def test_full_forms(self):
        assert parse_fault("drift_shift:run=15") == Fault(kind="drift_shift", run=15)
        assert parse_fault("stale_age:run=12,days=45") == Fault(kind="stale_age", run=12, days=45.0)
        assert parse_fault("pin_stale:run=8,version=2") == Fault(kind="pin_stale", run=8, version=2)
        assert parse_fault("null_spike:run=3,column=value") == Fault(kind="null_spike", run=3)

    @pytest.mark.parametrize(
        "text",
        ["gremlins:run=3", "drift_shift", "drift_shift:run=0", "drift_shift:run=x", "drift_shift:run=3,hue=7", "drift_shift:run"],
    )
    def test_rejects(self, text):
        with pytest.raises(DomainError) as err:
            parse_fault(text)
        assert err.value.code is ErrorCode.BAD_REQUEST


class TestShape:
    def test_round_robin_chain(self, tmp_path):
        simulate(tmp_path / "a", seed=2, runs=7, components=3)
        with Store(tmp_path / "a") as store:
            snap = store.snapshot()
            assert sorted(snap.specs) == ["stage0", "stage1", "stage2"]
            for run in snap.runs.values():
                stage = stage_of(run.run_id)
                assert run.component_name == f"stage{stage}"
                assert [o.name for o in run.outputs] == [stage_artifact(stage)]
                expected_inputs = [] if stage == 0 else [stage_artifact(stage - 1)]
                assert [i.name for i in run.inputs] == expected_inputs

    def test_sample_regeneration_matches_journal(self, tmp_path):
        simulate(tmp_path / "a", seed=11, runs=6)
        with Store(tmp_path / "a") as store:
            for run in store.snapshot().runs.values():
                assert list(run.samples[0].values) == column_sample(11, run.run_id, "value")
                assert run.metrics["accuracy"] == metric_value(11, run.run_id)
