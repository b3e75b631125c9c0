import json

import numpy as np
import pytest

from lopfield.embed import (
    CropRef,
    FileProvider,
    ImageRef,
    SyntheticProvider,
    compose_prompt,
)
from lopfield.errors import InvalidInput, InvalidLabel
from lopfield.scene import OBJECT_VOCABULARY, REGION_VOCABULARY


def test_compose_prompt_examples():
    assert compose_prompt("cup", "kitchen") == "cup in the kitchen"
    assert compose_prompt("sofa", "TV room") == "sofa in the TV room"
    assert compose_prompt("bed", "bedroom") == "bed in the bedroom"


@pytest.mark.parametrize("obj,region", [("", "kitchen"), ("cup", ""), ("  ", "kitchen")])
def test_compose_prompt_rejects_empty_labels(obj, region):
    with pytest.raises(InvalidLabel):
        compose_prompt(obj, region)


def test_text_embedding_deterministic():
    p = SyntheticProvider(seed=0)
    a_v, a_s = p.embed_text("kitchen")
    b_v, b_s = p.embed_text("kitchen")
    assert np.array_equal(a_v, b_v) and np.array_equal(a_s, b_s)
    q = SyntheticProvider(seed=0)
    c_v, c_s = q.embed_text("kitchen")
    assert np.array_equal(a_v, c_v) and np.array_equal(a_s, c_s)


def test_unit_norm_for_random_strings():
    p = SyntheticProvider(seed=3)
    rng = np.random.default_rng(0)
    words = ["w%d" % i for i in range(40)]
    for _ in range(100):
        text = " ".join(rng.choice(words, size=rng.integers(1, 6)))
        for vec in p.embed_text(text):
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-5


def test_shared_token_prompts_have_cos_strictly_between_0_and_1():
    p = SyntheticProvider(seed=0)
    pairs = [
        ("cup in the kitchen", "cup in the bedroom"),
        ("sofa in the living room", "sofa in the dining room"),
        ("kitchen", "cup in the kitchen"),
    ]
    for a, b in pairs:
        for k in range(2):
            c = float(p.embed_text(a)[k] @ p.embed_text(b)[k])
            assert 0.0 < c < 1.0


def test_unrelated_labels_stay_below_half_cosine():
    p = SyntheticProvider(seed=0)
    vocab = list(REGION_VOCABULARY) + list(OBJECT_VOCABULARY)
    for i, a in enumerate(vocab):
        for b in vocab[i + 1:]:
            if set(a.split()) & set(b.split()):
                continue
            for k in range(2):
                c = abs(float(p.embed_text(a)[k] @ p.embed_text(b)[k]))
                assert c < 0.5, (a, b, c)


def test_crop_embedding_near_class_text():
    p = SyntheticProvider(seed=0)
    base = p.embed_text("sofa")[0]
    crop = p.embed_image_crop(CropRef(label="sofa", instance_key=7))
    assert abs(np.linalg.norm(crop) - 1.0) < 1e-9
    # noise norm is capped at 0.1 before renormalization
    assert float(crop @ base) > 0.99
    other = p.embed_image_crop(CropRef(label="sofa", instance_key=8))
    assert not np.array_equal(crop, other)


def test_whole_image_embedding_tracks_region():
    p = SyntheticProvider(seed=0)
    img = p.embed_image(ImageRef(region_label="kitchen", frame_key=3))
    base = p.embed_text("kitchen")[0]
    assert float(img @ base) > 0.99


def test_dims_floor_enforced():
    with pytest.raises(InvalidInput):
        SyntheticProvider(dv=4, ds=64)


def test_file_provider_round_trip(tmp_path):
    src = SyntheticProvider(seed=1, dv=16, ds=16)
    vl, sem = src.embed_text("cup")
    data = {
        "dv": 16,
        "ds": 16,
        "text": {"cup": {"vl": vl.tolist(), "sem": sem.tolist()}},
        "crops": {"5": vl.tolist()},
        "images": {"kitchen": vl.tolist()},
    }
    path = tmp_path / "emb.json"
    path.write_text(json.dumps(data))
    fp = FileProvider(path)
    assert fp.dv == 16 and fp.ds == 16
    got_vl, got_sem = fp.embed_text("cup")
    assert np.allclose(got_vl, vl) and np.allclose(got_sem, sem)
    assert np.allclose(fp.embed_image_crop(CropRef("anything", 5)), vl)
    assert np.allclose(fp.embed_image(ImageRef("kitchen", 99)), vl)
    with pytest.raises(InvalidInput):
        fp.embed_text("unknown")
