import json
from dataclasses import replace

import numpy as np
import pytest

from sarbp.backprojection import OptimizationConfig, halve_rx
from sarbp.metrics import RegionSpec, image_diff_db
from sarbp.pipeline import (
    MATRIX_LABELS,
    GridSpec,
    PipelineConfig,
    TrajectorySpec,
    measure_matrix,
    prepare,
    reconstruct,
    simulate,
)
from sarbp.signal_model import ConfigError, RadarParams, accelerating_trajectory
from sarbp.simulator import BeatSpectrum, DataError, PointScatterer

RX16 = RadarParams.desk().replace(num_rx=16)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = PipelineConfig(
            trajectory=TrajectorySpec("accelerating", v0=8.0, v1=12.0),
            grid=GridSpec("polar", factor=3.0),
            measures=OptimizationConfig.combined((0, 2)),
            algo="optimized",
            window="kaiser", window_beta=4.0, oversample=2, noise_sigma=0.1, seed=7,
            regions=(RegionSpec("t", (0.2, 4.9, 0.4, 5.1)),),
            noise_region=RegionSpec("n", (-1.2, 3.8, -1.0, 4.0)),
        )
        path = tmp_path / "c.json"
        cfg.save(path)
        assert PipelineConfig.load(path) == cfg

    def test_defaults_from_empty_document(self):
        cfg = PipelineConfig.from_dict({})
        assert cfg.radar == RadarParams.desk() and cfg.scene == PipelineConfig().scene

    def test_optimized_requires_measures(self):
        with pytest.raises(ConfigError, match="requires"):
            PipelineConfig(algo="optimized", measures=OptimizationConfig(window_vector=True, math_opt=True))

    def test_polar_factor_below_two(self):
        with pytest.raises(ConfigError, match="point targets"):
            PipelineConfig.from_dict({"grid": {"kind": "polar", "factor": 1.5}})

    @pytest.mark.parametrize("doc", [{"bogus": 1}, {"trajectory": {"kind": "helix"}}, {"oversample": 0},
                                     {"measures": {"rx_subset": [0, 9]}}, {"window": {"family": "nope"}},
                                     {"regions": [{"name": "a", "rect": [0, 0, 1, 1]}]}])
    def test_invalid(self, doc):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(doc)

    def test_trajectory_file(self, tmp_path):
        p = RadarParams.desk()
        traj = accelerating_trajectory(p, 9.0, 11.0)
        (tmp_path / "traj.json").write_text(json.dumps(traj.to_dict()))
        (tmp_path / "c.json").write_text(json.dumps({"trajectory": {"kind": "file", "file": "traj.json"}}))
        cfg = PipelineConfig.load(tmp_path / "c.json")
        np.testing.assert_array_equal(cfg.build_trajectory().poses, traj.poses)

    def test_missing_trajectory_file(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"trajectory": {"kind": "file", "file": "gone.json"}}))
        with pytest.raises(ConfigError, match="does not exist"):
            PipelineConfig.load(tmp_path / "c.json")

    def test_bad_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{nope")
        with pytest.raises(ConfigError):
            PipelineConfig.load(tmp_path / "c.json")


class TestMeasureMatrix:
    def test_labels_and_flags(self):
        rows = dict(measure_matrix(PipelineConfig(grid=GridSpec("polar"))))
        assert tuple(rows) == MATRIX_LABELS
        assert rows["ref"].measures == OptimizationConfig.reference()
        assert rows["comb"].algo == "optimized" and rows["comb"].measures.polar_grid
        assert rows["rx"].measures.rx_subset == halve_rx(4)
        assert all(c.grid.kind == "cartesian" for c in rows.values())
        assert sum(c.uses_polar for c in rows.values()) == 2


class TestPrepare:
    def test_dims_mismatch(self):
        cfg = PipelineConfig()
        with pytest.raises(DataError, match="dims"):
            prepare(cfg, BeatSpectrum(np.zeros((64, 4, 64)), 0.0, 1.0))

    def test_oversampled_spectrum_accepted(self):
        cfg = PipelineConfig(oversample=2)
        prep = prepare(cfg, simulate(cfg))
        assert prep.inputs.data.shape == (64, 4, 256)

    def test_polar_grid_and_subset(self):
        cfg = PipelineConfig(measures=OptimizationConfig(polar_grid=True, rx_subset=(1, 3)))
        prep = prepare(cfg, simulate(cfg))
        assert prep.grid.kind == 1 and prep.rx_subset == (1, 3)
        assert prep.inputs.data.shape[1] == 2

    def test_empty_scene(self):
        with pytest.raises(ConfigError):
            simulate(PipelineConfig(scene=()))


class TestReconstruct:
    def test_argmax_and_sidecar(self):
        cfg = PipelineConfig(scene=(PointScatterer((0.3, 5.0)),), oversample=4)
        rec = reconstruct(cfg, simulate(cfg))
        side = rec.sidecar()
        assert side["argmax_position"] == pytest.approx([0.3, 5.0], abs=1e-9)
        assert side["grid_kind"] == "cartesian" and side["pixel_count"] == 101 * 101
        assert side["bytes_prepared"] == rec.prepared.inputs.nbytes()["total"]
        assert side["flagged_pixels"] == 0

    def test_halving_rx_costs_six_db(self):
        # noise-free, so the peak change is the coherent-sum loss alone
        cfg = PipelineConfig(radar=RX16, scene=(PointScatterer((0.0, 5.0)),), window="rectangular")
        spec = simulate(cfg)
        full = reconstruct(cfg, spec).image
        half = reconstruct(replace(cfg, measures=OptimizationConfig(rx_subset=halve_rx(16))), spec).image
        assert abs(20 * np.log10(half.magnitude.max() / full.magnitude.max()) + 6.02) < 0.1

    def test_optimized_half_array_against_full_reference(self):
        cfg = PipelineConfig(radar=RX16)
        spec = simulate(cfg)
        ref = reconstruct(cfg, spec).image
        comb = dict(measure_matrix(cfg))["comb"]
        opt = reconstruct(replace(comb, measures=replace(comb.measures, polar_grid=False)), spec).image
        d = image_diff_db(opt, ref)
        assert -6.5 <= d.median <= 0.0
