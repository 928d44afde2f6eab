import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opsim.core import MessageRecord, RoutingMode
from opsim.metrics import (
    RunMetrics,
    aggregate_seeds,
    delivery_probability,
    latency_stats,
    read_outcomes_csv,
    run_metrics,
    write_outcomes_csv,
)


def outcome(msg_id, delivered_step=None, created=0, origin=0):
    return MessageRecord(
        id=msg_id, origin_patient=origin, created_step=created, ttl_steps=48,
        delivered=delivered_step is not None, delivered_step=delivered_step,
    )


class TestDeliveryProbability:
    def test_partial(self):
        msgs = [outcome(i, delivered_step=5) for i in range(8)]
        msgs += [outcome(8), outcome(9)]
        assert delivery_probability(msgs) == 0.8

    def test_all(self):
        assert delivery_probability([outcome(i, 1) for i in range(10)]) == 1.0

    def test_none(self):
        assert delivery_probability([outcome(i) for i in range(10)]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            delivery_probability([])


class TestLatencyStats:
    def test_mean_and_max(self):
        # latencies 2 h, 13 h, 5 h at 30-min steps
        msgs = [outcome(0, 4), outcome(1, 26), outcome(2, 10)]
        mean, peak = latency_stats(msgs, step_minutes=30)
        assert mean == pytest.approx(400.0)  # 6.667 h in minutes
        assert mean / 60 == pytest.approx(6.666666666666667)
        assert peak == 780.0  # 13 h

    def test_delivery_at_creation_step(self):
        mean, peak = latency_stats([outcome(0, 0)], step_minutes=30)
        assert mean == 0.0 and peak == 0.0

    def test_thirteen_hours_from_step_span(self):
        mean, peak = latency_stats([outcome(0, 30, created=4)], step_minutes=30)
        assert mean == 780.0 and peak == 780.0

    def test_undelivered_excluded(self):
        msgs = [outcome(0, 4), outcome(1)]
        mean, peak = latency_stats(msgs, step_minutes=30)
        assert mean == 120.0 and peak == 120.0

    def test_absent_when_no_deliveries(self):
        assert latency_stats([outcome(0)], step_minutes=30) is None


def rm(delivery, latency=None, n=10):
    delivered = 0 if delivery is None else round(delivery * n)
    return RunMetrics(
        n_generated=n,
        n_delivered=delivered,
        delivery_probability=delivery,
        mean_latency_minutes=latency,
        max_latency_minutes=latency,
    )


class TestAggregateSeeds:
    def test_sem_from_sample_sd(self):
        report = aggregate_seeds([rm(1.0), rm(0.8), rm(0.9), rm(0.9)])
        assert report.delivery_mean == pytest.approx(0.9)
        # sample sd 0.081650 over sqrt(4)
        assert report.delivery_sem == pytest.approx(0.040824829046386304, abs=1e-12)

    def test_identical_values_zero_sem(self):
        report = aggregate_seeds([rm(0.7)] * 5)
        assert report.delivery_sem == 0.0

    def test_zero_delivery_seeds_excluded_from_latency_only(self):
        reports = [rm(1.0, latency=60.0), rm(0.0, latency=None), rm(0.5, latency=120.0)]
        agg = aggregate_seeds(reports)
        assert agg.delivery_mean == pytest.approx(0.5)
        assert agg.latency_mean_minutes == pytest.approx(90.0)
        assert len(agg.latency_mean_per_seed) == 2
        assert len(agg.delivery_per_seed) == 3

    def test_hours_properties(self):
        agg = aggregate_seeds([rm(1.0, latency=780.0), rm(1.0, latency=780.0)])
        assert agg.latency_mean_hours == pytest.approx(13.0)
        assert agg.max_latency_minutes == 780.0
        assert agg.max_latency_hours == pytest.approx(13.0)

    def test_no_deliveries_anywhere(self):
        agg = aggregate_seeds([rm(0.0), rm(0.0)])
        assert agg.latency_mean_minutes is None
        assert agg.max_latency_minutes is None
        assert agg.latency_mean_hours is None

    @given(st.permutations(range(8)))
    @settings(max_examples=40, deadline=None)
    def test_permutation_invariant(self, order):
        base = [rm(0.1 * i, latency=30.0 * (i + 1)) for i in range(8)]
        ref = aggregate_seeds(base)
        shuffled = aggregate_seeds([base[i] for i in order])
        assert shuffled.delivery_mean == pytest.approx(ref.delivery_mean, abs=1e-12)
        assert shuffled.delivery_sem == pytest.approx(ref.delivery_sem, abs=1e-12)
        assert shuffled.latency_mean_minutes == pytest.approx(
            ref.latency_mean_minutes, abs=1e-9
        )
        assert shuffled.max_latency_minutes == ref.max_latency_minutes


class TestCsvRoundTrip:
    def test_recompute_from_csv_is_exact(self, tmp_path):
        msgs = [outcome(i, delivered_step=3 * i if i % 3 else None, origin=i)
                for i in range(12)]
        path = tmp_path / "run.csv"
        write_outcomes_csv(path, msgs, RoutingMode.HYBRID, seed=5, step_minutes=30)
        rows = read_outcomes_csv(path)
        in_memory = run_metrics(msgs, step_minutes=30)
        delivered = [r for r in rows if r["delivered"]]
        assert len(rows) == in_memory.n_generated
        assert len(delivered) == in_memory.n_delivered
        assert len(delivered) / len(rows) == in_memory.delivery_probability
        lat = [r["latency_minutes"] for r in delivered]
        assert sum(lat) / len(lat) == in_memory.mean_latency_minutes
        assert float(max(lat)) == in_memory.max_latency_minutes

    def test_csv_format(self, tmp_path):
        path = tmp_path / "run.csv"
        write_outcomes_csv(path, [outcome(0, 26)], RoutingMode.DTN, seed=1, step_minutes=30)
        text = path.read_text()
        assert text.splitlines()[0] == (
            "message_id,origin,created_step,delivered,delivered_step,"
            "latency_minutes,mode,seed"
        )
        assert text.splitlines()[1] == "0,0,0,true,26,780,dtn,1"
        assert "\r" not in text
