import json
import subprocess
import sys

import numpy as np
import pytest

from pyloncrf.metrics import boundary_gt, confusion, metrics
from pyloncrf.pipeline import estimate_compatibility, segment
from pyloncrf.synth import RectSpec, SceneSpec, generate_scene
from pyloncrf.regions import _partition_from_ids
from pyloncrf.tensorio import LabelMap, Raster, RunConfig, read_tensor, read_array


class TestSynth:
    def test_zero_noise_argmax_reproduces_gt(self):
        scene = generate_scene(SceneSpec(height=48, width=48, class_count=3, noise=0.0, seed=2))
        pred = np.argmax(scene.likelihoods.values, axis=2)
        assert np.array_equal(pred, scene.gt.labels)

    def test_fixed_seed_bit_identical(self):
        a = generate_scene(SceneSpec(height=40, width=40, seed=9))
        b = generate_scene(SceneSpec(height=40, width=40, seed=9))
        assert a.likelihoods.values.tobytes() == b.likelihoods.values.tobytes()
        assert a.boundaries.values.tobytes() == b.boundaries.values.tobytes()
        assert a.gt.labels.tobytes() == b.gt.labels.tobytes()
        assert a.elevation.values.tobytes() == b.elevation.values.tobytes()
        assert a.image.values.tobytes() == b.image.values.tobytes()

    def test_out_of_bounds_rect_rejected(self):
        with pytest.raises(ValueError, match="bounds"):
            SceneSpec(height=20, width=20,
                      rects=[RectSpec(10, 10, 20, 5, 1, 1.0)])

    def test_probability_ranges(self):
        scene = generate_scene(SceneSpec(height=32, width=32, noise=0.4, seed=1))
        assert 0.0 <= scene.likelihoods.values.min()
        assert scene.likelihoods.values.max() <= 1.0
        assert 0.0 <= scene.boundaries.values.min()
        assert scene.boundaries.values.max() <= 1.0


@pytest.fixture(scope="module")
def scene():
    return generate_scene(SceneSpec(height=64, width=64, class_count=3, noise=0.3, seed=4))


class TestModes:
    def test_unary_px_is_argmax(self, scene):
        cfg = RunConfig(class_count=3, mode="unary-px")
        r = segment(cfg, scene.likelihoods)
        assert np.array_equal(
            r.label_map.labels, np.argmax(scene.likelihoods.values, axis=2)
        )

    def test_unary_sp_outperforms_px_here(self, scene):
        px = segment(RunConfig(class_count=3, mode="unary-px"), scene.likelihoods)
        sp = segment(
            RunConfig(class_count=3, mode="unary-sp"),
            scene.likelihoods, scene.boundaries, scene.elevation,
        )
        oa = lambda r: (r.label_map.labels == scene.gt.labels).mean()
        assert oa(sp) > oa(px)

    def test_crf_modes_valid_labels_and_energy(self, scene):
        for mode in ("crf-flat", "crf-tree"):
            cfg = RunConfig(class_count=3, mode=mode)
            r = segment(cfg, scene.likelihoods, scene.boundaries, scene.elevation)
            assert r.label_map.labels.max() < 3
            assert r.solution.energy <= r.solution.energy_trace[0]

    def test_crf_color_drops_geo_potentials(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-color")
        r = segment(cfg, scene.likelihoods, scene.boundaries, features=scene.image)
        assert r.model.lambdas[1:] == (0.0, 0.0, 0.0)

    def test_crf_color_requires_features(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-color")
        with pytest.raises(ValueError, match="features"):
            segment(cfg, scene.likelihoods, scene.boundaries)

    def test_missing_elevation_with_lambda_e(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-tree")
        with pytest.raises(ValueError, match="elevation"):
            segment(cfg, scene.likelihoods, scene.boundaries)

    def test_lambda_e_zero_without_elevation_ok(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-tree", lambdas=(1, 1, 1, 0))
        r = segment(cfg, scene.likelihoods, scene.boundaries)
        assert r.solution is not None

    def test_degenerate_config_equals_unary_sp(self, scene):
        deg = segment(
            RunConfig(class_count=3, mode="crf-tree", lambdas=(0, 0, 0, 0), gamma=0.0),
            scene.likelihoods, scene.boundaries, scene.elevation,
        )
        sp = segment(
            RunConfig(class_count=3, mode="unary-sp"),
            scene.likelihoods, scene.boundaries, scene.elevation,
        )
        assert np.array_equal(deg.label_map.labels, sp.label_map.labels)

    def test_shape_mismatch_rejected(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-tree")
        small = Raster(scene.boundaries.values[:32, :32])
        with pytest.raises(ValueError, match="shape"):
            segment(cfg, scene.likelihoods, small, scene.elevation)

    def test_noisy_scene_border_recovery(self):
        from pyloncrf.metrics import _dilate_chebyshev

        big = generate_scene(SceneSpec(128, 128, 4, noise=0.3, seed=2))
        px = segment(RunConfig(class_count=4, mode="unary-px"), big.likelihoods)
        assert (px.label_map.labels == big.gt.labels).mean() < 1.0
        tr = segment(
            RunConfig(class_count=4, mode="crf-tree"),
            big.likelihoods, big.boundaries, big.elevation,
        )
        gt_b = boundary_gt(big.gt, 4, width=1).values
        pr_b = boundary_gt(tr.label_map, 4, width=1).values
        # rectangle classes (1, 2); small car-like blobs are allowed to
        # oversmooth, which is the known failure mode of CRF smoothing
        recovered = total = 0
        for c in (1, 2):
            gt_px = gt_b[:, :, c] > 0
            pred_near = _dilate_chebyshev(pr_b[:, :, c] > 0, 1)
            recovered += (gt_px & pred_near).sum()
            total += gt_px.sum()
        assert recovered / total >= 0.90

    def test_end_to_end_determinism(self, scene):
        cfg = RunConfig(class_count=3, mode="crf-tree")
        a = segment(cfg, scene.likelihoods, scene.boundaries, scene.elevation)
        b = segment(cfg, scene.likelihoods, scene.boundaries, scene.elevation)
        assert np.array_equal(a.label_map.labels, b.label_map.labels)
        assert a.solution.energy == b.solution.energy


class TestCooc:
    def test_single_class_gt_all_capped(self):
        ids = np.arange(16).reshape(4, 4).astype(np.int64)
        part = _partition_from_ids(ids)
        gt = LabelMap(np.zeros((4, 4), dtype=np.uint8))
        cfg = RunConfig(class_count=3)
        with pytest.warns(UserWarning):
            mu = estimate_compatibility(cfg, [(gt, part)])
        off_diag = mu[~np.eye(3, dtype=bool)]
        assert np.all(off_diag == cfg.mu_cap)

    def test_checkerboard_alternating_classes(self):
        ids = np.arange(16).reshape(4, 4).astype(np.int64)
        part = _partition_from_ids(ids)
        gt = np.indices((4, 4)).sum(axis=0) % 2
        cfg = RunConfig(class_count=2)
        mu = estimate_compatibility(cfg, [(LabelMap(gt.astype(np.uint8)), part)])
        assert mu[0, 1] == 0.0  # all adjacencies are cross-class
        assert mu[0, 0] == 0.0

    def test_unseen_pair_capped(self):
        ids = np.repeat(np.arange(4)[None, :], 4, axis=0).astype(np.int64)
        part = _partition_from_ids(ids)
        gt = np.repeat(np.array([[0, 0, 1, 2]]), 4, axis=0).astype(np.uint8)
        cfg = RunConfig(class_count=3)
        mu = estimate_compatibility(cfg, [(LabelMap(gt), part)])
        assert mu[0, 2] == cfg.mu_cap  # classes 0 and 2 never adjacent
        assert mu[0, 1] < cfg.mu_cap
        assert np.array_equal(mu, mu.T)
        assert np.all(np.diag(mu) == 0)


def _cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "pyloncrf.cli", *args],
        capture_output=True, text=True,
    )


class TestCli:
    def test_synth_segment_eval_roundtrip(self, tmp_path):
        out = tmp_path / "scene"
        r = _cli("synth", "--out", str(out), "--height", "48", "--width", "48",
                 "--classes", "3", "--seed", "5")
        assert r.returncode == 0, r.stderr
        for name in ("image", "gt", "likelihoods", "boundaries", "elevation"):
            assert (out / f"{name}.ftn").exists()

        seg = tmp_path / "seg"
        r = _cli(
            "segment", "--mode", "crf-tree", "--classes", "3",
            "--likelihoods", str(out / "likelihoods.ftn"),
            "--boundaries", str(out / "boundaries.ftn"),
            "--elevation", str(out / "elevation.ftn"),
            "--out", str(seg), "--dump-tree", "--dump-energy", "--dump-partition",
        )
        assert r.returncode == 0, r.stderr
        assert (seg / "pred.ftn").exists()
        assert (seg / "tree.json").exists()
        assert (seg / "energy.json").exists()
        tree = json.loads((seg / "tree.json").read_text())
        assert tree["leaf_count"] >= 1
        assert len(tree["nodes"]) == 2 * tree["leaf_count"] - 1

        r = _cli("eval-seg", "--classes", "3", "--gt", str(out / "gt.ftn"),
                 "--pred", str(seg / "pred.ftn"),
                 "--out", str(tmp_path / "metrics.json"))
        assert r.returncode == 0, r.stderr
        blob = json.loads((tmp_path / "metrics.json").read_text())
        assert 0.0 <= blob["overall_accuracy"] <= 1.0

        # default class count (4) mismatches this 3-class scene: exit 2
        r = _cli("eval-boundary", "--gt", str(out / "gt.ftn"),
                 "--pred", str(out / "boundaries.ftn"))
        assert r.returncode == 2
        r = _cli("eval-boundary", "--classes", "3",
                 "--gt", str(out / "gt.ftn"), "--pred", str(out / "boundaries.ftn"))
        assert r.returncode == 0, r.stderr
        rep = json.loads(r.stdout)
        assert rep["auc_3px"]["mean"] >= rep["auc_1px"]["mean"]

    def test_cooc_command(self, tmp_path):
        out = tmp_path / "scene"
        _cli("synth", "--out", str(out), "--height", "40", "--width", "40", "--seed", "6")
        seg = tmp_path / "seg"
        cfgp = tmp_path / "cfg.json"
        cfgp.write_text(json.dumps({"class_count": 4, "mode": "unary-sp"}))
        r = _cli("segment", "--config", str(cfgp),
                 "--likelihoods", str(out / "likelihoods.ftn"),
                 "--boundaries", str(out / "boundaries.ftn"),
                 "--elevation", str(out / "elevation.ftn"),
                 "--out", str(seg), "--dump-partition")
        assert r.returncode == 0, r.stderr
        r = _cli("cooc", "--config", str(cfgp), "--gt", str(out / "gt.ftn"),
                 "--partition", str(seg / "partition.ftn"),
                 "--out", str(tmp_path / "mu.ftn"))
        assert r.returncode == 0, r.stderr
        mu = read_array(tmp_path / "mu.ftn")
        assert mu.shape == (4, 4)
        assert np.all(np.diag(mu) == 0)

    def test_tree_export_command(self, tmp_path):
        out = tmp_path / "scene"
        _cli("synth", "--out", str(out), "--height", "32", "--width", "32", "--seed", "7")
        r = _cli("tree-export", "--likelihoods", str(out / "likelihoods.ftn"),
                 "--boundaries", str(out / "boundaries.ftn"),
                 "--elevation", str(out / "elevation.ftn"),
                 "--out", str(tmp_path / "tree.json"))
        assert r.returncode == 0, r.stderr
        blob = json.loads((tmp_path / "tree.json").read_text())
        assert {"id", "parent", "height", "area", "centroid"} <= set(blob["nodes"][0])

    def test_exit_code_validation_error(self, tmp_path):
        cfgp = tmp_path / "bad.json"
        cfgp.write_text(json.dumps({"weights": [0.6, 0.6, 0.1]}))
        r = _cli("synth", "--config", str(cfgp), "--out", str(tmp_path / "x"))
        assert r.returncode == 2

    def test_exit_code_io_error(self, tmp_path):
        r = _cli("segment", "--likelihoods", str(tmp_path / "missing.ftn"),
                 "--out", str(tmp_path / "o"))
        assert r.returncode == 3
        bad = tmp_path / "bad.ftn"
        bad.write_bytes(b"WRONGMAGIC-------")
        r = _cli("segment", "--likelihoods", str(bad), "--out", str(tmp_path / "o"))
        assert r.returncode == 3
