import numpy as np
import pytest

from synkit import perception, synergy, synthetic
from synkit.errors import UnknownTaskError


def principal_angle_deg(a, b):
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.degrees(np.arccos(np.clip(s.min(), -1.0, 1.0))))


class TestDemos:
    def test_zero_noise_equals_ground_truth(self):
        demos, truth = synthetic.generate_synthetic_demos("egg", count=4, noise=0.0, seed=3)
        for (times, angles), clean in zip(demos, truth["clean_demos"]):
            assert np.array_equal(angles, clean)

    def test_same_seed_identical(self):
        a, _ = synthetic.generate_synthetic_demos("egg", count=5, noise=0.01, seed=9)
        b, _ = synthetic.generate_synthetic_demos("egg", count=5, noise=0.01, seed=9)
        for (ta, qa), (tb, qb) in zip(a, b):
            assert np.array_equal(ta, tb)
            assert np.array_equal(qa, qb)

    @pytest.mark.parametrize("task", synthetic.TASKS)
    def test_pca_recovers_generative_directions(self, task):
        demos, truth = synthetic.generate_synthetic_demos(task, count=8, noise=0.004, seed=7)
        postures = np.vstack([angles for _, angles in demos])
        configs = synergy.ConfigurationMatrix.from_postures(
            postures, theta0=synthetic.nominal_posture())
        basis = synergy.fit_synergy_basis(configs, 0.85)
        assert basis.synergy_dim == 2
        assert principal_angle_deg(truth["directions"].T, basis.e_hat) < 5.0

    def test_unknown_task(self):
        with pytest.raises(UnknownTaskError):
            synthetic.generate_synthetic_demos("juggling", count=3, noise=0.0, seed=0)

    def test_count_validation_and_durations(self):
        with pytest.raises(ValueError):
            synthetic.generate_synthetic_demos("egg", count=1, noise=0.0, seed=0)
        demos, _ = synthetic.generate_synthetic_demos("egg", count=3, noise=0.0, seed=0)
        durations = [times[-1] for times, _ in demos]
        assert len(set(durations)) == 3  # distinct demo durations


class TestScene:
    @pytest.mark.parametrize("task", synthetic.TASKS)
    def test_segmentation_recovers_objects(self, task):
        cloud, meta = synthetic.generate_synthetic_scene(task, seed=11)
        _, _, outliers = perception.ransac_plane(cloud, iterations=300,
                                                 inlier_threshold=0.005, seed=11)
        clusters = perception.euclidean_cluster(cloud[outliers], epsilon=0.02,
                                                min_points=30)
        assert len(clusters) == len(meta["objects"]) >= 2

    def test_zero_noise_centroids_exact(self):
        cloud, meta = synthetic.generate_synthetic_scene("egg", seed=11, noise=0.0)
        for obj in meta["objects"]:
            pts = cloud[obj["start"]:obj["start"] + obj["count"]]
            err = np.linalg.norm(pts.mean(axis=0) - np.asarray(obj["centroid"]))
            assert err < 1e-3  # strictly below one millimeter

    def test_deterministic_given_seed(self):
        a, ma = synthetic.generate_synthetic_scene("ketchup", seed=4)
        b, mb = synthetic.generate_synthetic_scene("ketchup", seed=4)
        assert np.array_equal(a, b)
        assert ma == mb

    def test_objects_clear_of_table(self):
        cloud, meta = synthetic.generate_synthetic_scene("egg", seed=11, noise=0.0)
        for obj in meta["objects"]:
            pts = cloud[obj["start"]:obj["start"] + obj["count"]]
            assert pts[:, 2].min() >= synthetic.OBJECT_CLEARANCE - 1e-9

    def test_unknown_task(self):
        with pytest.raises(UnknownTaskError):
            synthetic.generate_synthetic_scene("juggling", seed=0)


class TestFixture:
    def test_svm_fixture_balanced_and_deterministic(self):
        fa, la = synthetic.svm_training_fixture("egg", seed=13)
        fb, lb = synthetic.svm_training_fixture("egg", seed=13)
        assert np.array_equal(fa, fb)
        assert la == lb
        assert sorted(set(la)) == ["egg", "tray"]
        assert la.count("egg") == la.count("tray")
