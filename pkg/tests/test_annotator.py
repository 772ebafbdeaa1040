"""Annotation of single images and directories of feature files."""

import numpy as np
import pytest

from lamcore import (
    IGNORE_ID,
    FeatureTensor,
    GuidanceMode,
    InvalidInputError,
    LamModel,
    OptouParams,
    ScaParams,
    annotate,
    annotate_dataset,
    confusion,
    generate_scene,
    miou,
    sca_forward,
    train_from_seed,
    TrainConfig,
)
from lamcore import dataio


def small_model(rng, n=6, c=3, k=4):
    return LamModel(
        sca=ScaParams(rng.normal(size=(c, n)), rng.normal(size=c)),
        optou=OptouParams(rng.uniform(0.2, 2.0, k), rng.uniform(0, 0.5, k)),
        class_count=c,
        mode=GuidanceMode.SELF,
    )


class TestAnnotate:
    def test_dominant_channel_wins(self, rng):
        c, n = 3, 3
        weights = np.zeros((c, n))
        weights[1, :] = 1.0  # class 1 logit always highest
        model = LamModel(
            sca=ScaParams(weights, np.zeros(c)),
            optou=OptouParams.constant(4, 1.5, 0.0),
            class_count=c,
            mode=GuidanceMode.SCALE_ONLY,
        )
        feats = FeatureTensor(np.abs(rng.normal(size=(n, 5, 5))) + 0.1)
        labels = annotate(feats, model)
        assert np.all(labels.ids == 1)

    def test_oracle_on_own_seed_is_near_perfect(self):
        feats, gt = generate_scene(21, 4, 16, 32, 32, 0.1)
        model, _ = train_from_seed(feats, gt, TrainConfig(epochs=150, learning_rate=0.05))
        pred = annotate(feats, model, mode_override=GuidanceMode.ORACLE, oracle_gt=gt)
        agree = (pred.ids == gt.ids).mean()
        assert agree >= 0.999

    def test_scale_only_equals_adapter_argmax(self, rng):
        model = small_model(rng)
        feats = FeatureTensor(rng.normal(size=(6, 7, 7)))
        labels = annotate(feats, model, mode_override=GuidanceMode.SCALE_ONLY)
        f_sca = sca_forward(feats, model.sca)
        np.testing.assert_array_equal(labels.ids, np.argmax(f_sca.data, axis=0))

    def test_never_emits_ignore_and_is_pure(self, rng):
        model = small_model(rng)
        feats = FeatureTensor(rng.normal(size=(6, 5, 5)))
        a = annotate(feats, model)
        b = annotate(feats, model)
        assert not (a.ids == IGNORE_ID).any()
        assert a.ids.max() < model.class_count
        np.testing.assert_array_equal(a.ids, b.ids)

    def test_oracle_requires_gt(self, rng):
        model = small_model(rng)
        feats = FeatureTensor(rng.normal(size=(6, 4, 4)))
        with pytest.raises(InvalidInputError):
            annotate(feats, model, mode_override=GuidanceMode.ORACLE)


class TestAnnotateDataset:
    def test_empty_list(self, tmp_path, rng):
        model = small_model(rng)
        out = annotate_dataset([], model, tmp_path / "out")
        assert out == []
        assert not list((tmp_path / "out").glob("*.llb"))

    def test_three_valid_files(self, tmp_path, rng):
        model = small_model(rng)
        files = []
        for i in range(3):
            feats = FeatureTensor(rng.normal(size=(6, 4, 4)))
            path = tmp_path / f"img_{i}.lft"
            dataio.save_features(path, feats)
            files.append(path)
        out_dir = tmp_path / "out"
        summaries = annotate_dataset(files, model, out_dir)
        assert all(s.ok for s in summaries)
        for s in summaries:
            labels = dataio.load_labels(s.output)
            assert labels.ids.max() < model.class_count
            assert int(s.class_pixels.sum()) == 16

    def test_malformed_file_recorded_and_processing_continues(self, tmp_path, rng):
        model = small_model(rng)
        good = tmp_path / "good.lft"
        dataio.save_features(good, FeatureTensor(rng.normal(size=(6, 4, 4))))
        bad = tmp_path / "bad.lft"
        bad.write_bytes(b"garbage")
        summaries = annotate_dataset([bad, good], model, tmp_path / "out")
        assert [s.ok for s in summaries] == [False, True]
        assert "magic" in summaries[0].error or "header" in summaries[0].error

    def test_self_mode_beats_or_matches_scale_only(self, tmp_path):
        feats, gt = generate_scene(33, 4, 16, 32, 32, 0.1)
        model, _ = train_from_seed(feats, gt, TrainConfig(epochs=150, learning_rate=0.05))
        files = []
        gts = {}
        for i in range(5):
            f, g = generate_scene(7000 + i, 4, 16, 32, 32, 0.1)
            path = tmp_path / f"scene_{i}.lft"
            dataio.save_features(path, f)
            files.append(path)
            gts[path.stem] = g
        for mode, sub in ((GuidanceMode.SELF, "self"), (GuidanceMode.SCALE_ONLY, "so")):
            annotate_dataset(files, model, tmp_path / sub, mode=mode)
        for i in range(5):
            stem = f"scene_{i}"
            g = gts[stem]
            m_self = confusion(dataio.load_labels(tmp_path / "self" / f"{stem}.llb"), g, 4)
            m_so = confusion(dataio.load_labels(tmp_path / "so" / f"{stem}.llb"), g, 4)
            assert miou(m_self)[1] >= miou(m_so)[1] - 1e-12

    def test_emit_color_writes_ppm(self, tmp_path, rng):
        model = small_model(rng)
        path = tmp_path / "img.lft"
        dataio.save_features(path, FeatureTensor(rng.normal(size=(6, 4, 4))))
        pal = dataio.make_palette(model.class_count)
        summaries = annotate_dataset(
            [path], model, tmp_path / "out", palette=pal, emit_color=True
        )
        assert summaries[0].ok
        assert (tmp_path / "out" / "img.ppm").exists()
