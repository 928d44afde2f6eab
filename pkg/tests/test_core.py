import dataclasses
import json

import numpy as np
import pytest

from opsim.core import (
    ConfigError,
    GridSpec,
    MobilityState,
    NodeClass,
    PopulationError,
    RngStreams,
    RoutingMode,
    ScenarioConfig,
    build_population,
    round_half_up,
    stream_rng,
    validate_config,
)


def errors(violations):
    return [v for v in violations if v.is_error]


def warnings(violations):
    return [v for v in violations if not v.is_error]


class TestDefaults:
    def test_rural_town_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.adult_population == 400
        assert cfg.grid.side_cells == 820
        assert cfg.grid.cell_size_ft == 10.0
        assert cfg.n_pois == 25
        assert cfg.n_destinations == 1
        assert cfg.n_clinical_staff == 2
        assert cfg.employed_ratio == 0.935
        assert cfg.internet_ratio == 0.2
        assert cfg.range_mean_cells == 60.0
        assert cfg.range_sd_cells == 20.0
        assert cfg.step_minutes == 30
        assert cfg.duration_steps == 48  # 24 h horizon
        assert cfg.messages_per_patient == 1
        assert cfg.mode is RoutingMode.HYBRID

    def test_derived_counts(self):
        cfg = ScenarioConfig()
        assert cfg.n_intermediaries == 120  # 0.3 x 400
        assert cfg.n_employed == 112  # round(0.935 x 120)
        assert cfg.n_unemployed == 8
        assert cfg.internet_flag_count == 24  # round(0.2 x 122)
        assert cfg.ttl_steps == 48

    def test_round_half_up(self):
        assert round_half_up(24.4) == 24
        assert round_half_up(24.5) == 25
        assert round_half_up(112.2) == 112
        assert round_half_up(0.5) == 1


class TestValidate:
    def test_defaults_clean(self):
        assert validate_config(ScenarioConfig()) == []

    def test_ordering_violation_is_error(self):
        cfg = ScenarioConfig(n_destinations=2, n_clinical_staff=1)
        errs = errors(validate_config(cfg))
        assert len(errs) == 1
        assert "ordering" in errs[0].message

    def test_low_intermediary_margin_warns(self):
        cfg = ScenarioConfig(participation_ratio=0.05, n_caregivers=10)
        res = validate_config(cfg)
        assert not errors(res)
        warns = warnings(res)
        assert len(warns) == 1
        assert "|I|=20" in warns[0].message

    def test_participation_bounds(self):
        assert errors(validate_config(ScenarioConfig(participation_ratio=0.0)))
        assert errors(validate_config(ScenarioConfig(participation_ratio=1.5)))

    def test_zero_intermediaries_rejected(self):
        cfg = ScenarioConfig(participation_ratio=0.001, adult_population=100)
        assert any("intermediary" in v.message for v in errors(validate_config(cfg)))

    def test_grid_capacity(self):
        cfg = ScenarioConfig(grid=GridSpec(side_cells=5), n_pois=25)
        assert any("grid too small" in v.message for v in errors(validate_config(cfg)))

    def test_violations_returned_not_raised(self):
        cfg = ScenarioConfig(step_minutes=0, range_mean_cells=-1)
        res = validate_config(cfg)  # no exception
        assert len(errors(res)) >= 2


class TestConfigJson:
    def test_round_trip(self):
        cfg = ScenarioConfig(mode=RoutingMode.UPN, seed=7, participation_ratio=0.5)
        data = json.loads(json.dumps(cfg.to_json_dict()))
        assert ScenarioConfig.from_json_dict(data) == cfg

    def test_unknown_key_rejected(self):
        data = ScenarioConfig().to_json_dict()
        data["bogus"] = 1
        with pytest.raises(ConfigError, match="bogus"):
            ScenarioConfig.from_json_dict(data)

    def test_unknown_grid_key_rejected(self):
        data = ScenarioConfig().to_json_dict()
        data["grid"]["shape"] = "hex"
        with pytest.raises(ConfigError, match="shape"):
            ScenarioConfig.from_json_dict(data)

    def test_mode_parsing(self):
        data = ScenarioConfig().to_json_dict()
        data["mode"] = "DTN"
        assert ScenarioConfig.from_json_dict(data).mode is RoutingMode.DTN
        data["mode"] = "carrier-pigeon"
        with pytest.raises(ConfigError):
            ScenarioConfig.from_json_dict(data)

    def test_wrong_value_types_rejected(self):
        data = ScenarioConfig().to_json_dict()
        data["n_patients"] = "ten"
        with pytest.raises(ConfigError, match="n_patients"):
            ScenarioConfig.from_json_dict(data)
        data = ScenarioConfig().to_json_dict()
        data["caregiver_colocated"] = 1
        with pytest.raises(ConfigError, match="caregiver_colocated"):
            ScenarioConfig.from_json_dict(data)
        data = ScenarioConfig().to_json_dict()
        data["participation_ratio"] = 1  # int where float expected is fine
        assert ScenarioConfig.from_json_dict(data).participation_ratio == 1.0
        data = ScenarioConfig().to_json_dict()
        data["grid"]["side_cells"] = 12.5
        with pytest.raises(ConfigError, match="side_cells"):
            ScenarioConfig.from_json_dict(data)

    def test_digest_stable_and_sensitive(self):
        cfg = ScenarioConfig()
        assert cfg.digest() == ScenarioConfig().digest()
        assert cfg.digest() != dataclasses.replace(cfg, seed=1).digest()


class TestStreams:
    def test_streams_independent(self):
        a = RngStreams.from_seed(3)
        b = RngStreams.from_seed(3)
        # burn draws on one stream; another stream's output is unchanged
        a.flags.random(1000)
        assert np.array_equal(a.mobility.random(16), b.mobility.random(16))

    def test_streams_distinct(self):
        s = RngStreams.from_seed(3)
        assert not np.array_equal(s.mobility.random(8), s.placement.random(8))

    def test_batched_draws_match_sequential(self):
        # the engine batches per-step draws; semantics must equal one-at-a-time
        batch = stream_rng(5, "mobility").random(64)
        one = stream_rng(5, "mobility")
        assert np.array_equal(batch, np.array([one.random() for _ in range(64)]))


class TestBuildPopulation:
    def build(self, cfg):
        return build_population(cfg, RngStreams.from_seed(cfg.seed))

    def test_counts_match_cardinalities(self):
        cfg = ScenarioConfig()
        records = self.build(cfg)
        by_class = {}
        for r in records:
            by_class[r.node_class] = by_class.get(r.node_class, 0) + 1
        assert by_class[NodeClass.PATIENT] == 10
        assert by_class[NodeClass.CAREGIVER] == 10
        assert by_class[NodeClass.CLINICAL_STAFF] == 2
        assert by_class[NodeClass.INTERMEDIARY_EMPLOYED] == 112
        assert by_class[NodeClass.INTERMEDIARY_UNEMPLOYED] == 8
        assert by_class[NodeClass.POI] == 25
        assert by_class[NodeClass.DESTINATION] == 1
        assert len(records) == 10 + 10 + 2 + 120 + 25 + 1

    def test_deterministic(self):
        cfg = ScenarioConfig(seed=42)
        assert self.build(cfg) == self.build(cfg)

    def test_internet_flags_exact_count(self):
        cfg = ScenarioConfig()  # |I|=120, |S|=2, r=0.2 -> 24 flagged
        records = self.build(cfg)
        flagged = [
            r
            for r in records
            if r.internet_capable and r.node_class is not NodeClass.DESTINATION
        ]
        assert len(flagged) == 24
        assert all(
            r.node_class
            in (
                NodeClass.CLINICAL_STAFF,
                NodeClass.INTERMEDIARY_EMPLOYED,
                NodeClass.INTERMEDIARY_UNEMPLOYED,
            )
            for r in flagged
        )

    def test_destination_always_capable_patients_never(self):
        from opsim.core import ConnectivityState

        records = self.build(ScenarioConfig())
        for r in records:
            if r.node_class is NodeClass.DESTINATION:
                assert r.internet_capable
                assert r.connectivity is ConnectivityState.INTERNET_AVAILABLE
            if r.node_class in (NodeClass.PATIENT, NodeClass.CAREGIVER, NodeClass.POI):
                assert not r.internet_capable
                assert r.connectivity is ConnectivityState.D2D_ONLY

    def test_caregivers_colocated(self):
        records = self.build(ScenarioConfig())
        patients = {r.id: r for r in records if r.node_class is NodeClass.PATIENT}
        for r in records:
            if r.node_class is NodeClass.CAREGIVER:
                assert r.linked_patient in patients
                assert r.home_cell == patients[r.linked_patient].home_cell

    def test_caregivers_uniform_when_not_colocated(self):
        records = self.build(ScenarioConfig(caregiver_colocated=False, seed=5))
        patients = {r.id: r for r in records if r.node_class is NodeClass.PATIENT}
        homes = [
            r.home_cell == patients[r.linked_patient].home_cell
            for r in records
            if r.node_class is NodeClass.CAREGIVER
        ]
        assert not all(homes)

    def test_work_cells(self):
        records = self.build(ScenarioConfig())
        poi_cells = {r.home_cell for r in records if r.node_class is NodeClass.POI}
        dest_cells = {r.home_cell for r in records if r.node_class is NodeClass.DESTINATION}
        for r in records:
            if r.node_class is NodeClass.INTERMEDIARY_EMPLOYED:
                assert r.work_cell in poi_cells
            elif r.node_class is NodeClass.CLINICAL_STAFF:
                assert r.work_cell in dest_cells
            else:
                assert r.work_cell is None

    def test_stationary_cells_distinct(self):
        records = self.build(ScenarioConfig())
        cells = [
            r.home_cell
            for r in records
            if r.node_class in (NodeClass.POI, NodeClass.DESTINATION)
        ]
        assert len(cells) == len(set(cells))

    def test_stationary_pseudo_state(self):
        records = self.build(ScenarioConfig())
        for r in records:
            expected = (
                MobilityState.STATIONARY
                if r.node_class in (NodeClass.POI, NodeClass.DESTINATION)
                else MobilityState.HOME
            )
            assert r.current_state is expected

    def test_cells_within_grid(self):
        cfg = ScenarioConfig(seed=9)
        for r in self.build(cfg):
            x, y = r.home_cell
            assert 0 <= x < cfg.grid.side_cells
            assert 0 <= y < cfg.grid.side_cells

    def test_range_distribution(self):
        # mean 60 sd 20 cells: ~68% of draws in [40, 80] cells (= 400-800 ft),
        # empirical mean within 2% of the configured mean
        cfg = ScenarioConfig(
            adult_population=40000,
            participation_ratio=0.3,
            n_caregivers=10,
            grid=GridSpec(side_cells=2000),
        )
        records = self.build(cfg)
        ranges = np.array([r.radio_range_cells for r in records])
        assert len(ranges) >= 10_000
        assert (ranges >= 1.0).all()
        inside = ((ranges >= 40) & (ranges <= 80)).mean()
        assert 0.66 <= inside <= 0.70
        assert abs(ranges.mean() - 60.0) / 60.0 < 0.02

    def test_grid_too_small_raises(self):
        cfg = ScenarioConfig(grid=GridSpec(side_cells=5), n_pois=25)
        with pytest.raises((PopulationError, ConfigError)):
            self.build(cfg)
