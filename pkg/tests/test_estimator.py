import numpy as np
import pytest
from sklearn.base import clone

from lopfield import LopFieldEstimator
from lopfield.embed import save_cloud
from lopfield.errors import InvalidInput
from lopfield.query import LabelBank
from lopfield.scene import region_of_batch


def desk_estimator(**kw):
    params = dict(
        levels=6, features_per_level=4, log2_table_size=12,
        batch_size=64, epochs=3, samples_per_epoch=2000, learning_rate=1e-3,
        seed=0,
    )
    params.update(kw)
    return LopFieldEstimator(**params)


def test_get_set_params_and_clone_round_trip():
    est = desk_estimator()
    params = est.get_params()
    assert params["levels"] == 6
    assert params["batch_size"] == 64
    est.set_params(epochs=5)
    assert est.epochs == 5
    dup = clone(est)
    assert dup.get_params() == est.get_params()


def test_unfitted_estimator_refuses_transform():
    est = desk_estimator()
    with pytest.raises(InvalidInput):
        est.transform(np.zeros((1, 3)))


def test_fit_transform_predict_score(small_cloud, small_scene, provider):
    bank = LabelBank.from_labels(small_scene.partition.regions, provider)
    est = desk_estimator(label_bank=bank).fit(small_cloud)
    assert est.dims_ == small_cloud.dims
    assert len(est.epoch_losses_) == 3

    pts = small_cloud.positions[:64].astype(np.float64)
    emb = est.transform(pts)
    assert emb.shape == (64, sum(small_cloud.dims))
    # both halves are unit (or zero) norm
    dv = small_cloud.dims[0]
    norms = np.linalg.norm(emb[:, :dv], axis=1)
    assert np.all((np.abs(norms - 1) < 1e-4) | (norms == 0))

    labels = est.predict(pts)
    assert set(labels) <= set(small_scene.partition.regions)
    truth = region_of_batch(pts[:, :2], small_scene.partition)
    acc = est.score(pts, truth)
    assert 0.0 <= acc <= 1.0


def test_fit_accepts_lopf_path(tmp_path, small_cloud):
    path = tmp_path / "c.lopf"
    save_cloud(small_cloud, path)
    est = desk_estimator().fit(path)
    assert est.dims_ == small_cloud.dims


def test_predict_without_bank_rejected(small_cloud):
    est = desk_estimator().fit(small_cloud)
    with pytest.raises(InvalidInput):
        est.predict(np.zeros((2, 3)))


def test_checkpoint_save_load_round_trip(tmp_path, small_cloud):
    est = desk_estimator().fit(small_cloud)
    path = tmp_path / "est.lopc"
    est.save(path)
    loaded = LopFieldEstimator.from_checkpoint(path)
    pts = small_cloud.positions[:16].astype(np.float64)
    assert np.allclose(est.transform(pts), loaded.transform(pts), atol=1e-6)
