import numpy as np
import pytest

from signseg.pipeline import PipelineOptions, parse_feature_flags, prepare_features
from signseg.pose import holistic_components, make_pose, save_pose
from signseg.synthetic import motion_pose, write_clip_dir
from signseg.tagger import TaggerConfig, init_model
from signseg.numutil import round_half_away
from signseg.tags import B, O, TagScheme, encode_tags, load_segments, save_segments
from signseg.train import (
    ClipData,
    EpochRow,
    corpus_class_weights,
    list_pairs,
    load_clip,
    load_corpus,
    mean_frame_f1,
    train,
    write_log,
)


def test_options_validation():
    with pytest.raises(ValueError, match="fps"):
        PipelineOptions(fps=0.0)
    with pytest.raises(ValueError, match="unknown feature"):
        PipelineOptions(features=("flow", "wavelets"))


def test_parse_feature_flags():
    assert parse_feature_flags("") == ()
    assert parse_feature_flags("flow") == ("flow",)
    assert parse_feature_flags("flow,handnorm") == ("flow", "handnorm")


def test_feature_widths_compact_skeleton():
    seq, _ = motion_pose(seed=0, num_frames=12)
    # 7 body + 2x21 hand points; x,y,z plus flow per point
    assert prepare_features(seq, PipelineOptions()).values.shape[1] == 196
    assert prepare_features(seq, PipelineOptions(features=())).values.shape[1] == 147
    wide = prepare_features(seq, PipelineOptions(features=("flow", "handnorm")))
    assert wide.values.shape[1] == 196 + 126


def test_feature_width_holistic_skeleton():
    comps = holistic_components()
    total = sum(len(c.points) for c in comps)
    rng = np.random.default_rng(3)
    coords = rng.normal(size=(4, total, 3))
    seq = make_pose(25.0, comps, coords, np.ones((4, total)))
    # normalization drops the 10 leg points: 75 selected -> 65 live
    feats = prepare_features(seq, PipelineOptions())
    assert feats.values.shape[1] == 260


def write_one_clip(dirpath, stem, seed=0, fps=25.0):
    seq, tiers = motion_pose(seed=seed, fps=fps, num_frames=80)
    save_pose(dirpath / f"{stem}.pose.json", seq)
    save_segments(dirpath / f"{stem}.segments.json", fps, tiers)
    return tiers


def test_list_pairs_ordering(tmp_path):
    write_one_clip(tmp_path, "b", seed=1)
    write_one_clip(tmp_path, "a", seed=2)
    pairs = list_pairs(tmp_path)
    assert [stem for stem, _, _ in pairs] == ["a", "b"]


def test_list_pairs_unpaired(tmp_path):
    write_one_clip(tmp_path, "good")
    (tmp_path / "stray.pose.json").write_text("{}")
    with pytest.raises(ValueError, match="unpaired clips.*stray"):
        list_pairs(tmp_path)


def test_list_pairs_empty_dir(tmp_path):
    with pytest.raises(ValueError, match="no .*clips"):
        list_pairs(tmp_path)


def test_load_clip_tags_match_segment_files(tmp_path):
    tiers = write_one_clip(tmp_path, "clip", seed=4)
    (stem, pose_path, seg_path) = list_pairs(tmp_path)[0]
    clip = load_clip(stem, pose_path, seg_path, PipelineOptions())
    t = clip.features.shape[0]
    for tier, segs in tiers.items():
        np.testing.assert_array_equal(clip.gold[tier],
                                      encode_tags(segs, t, TagScheme.BIO))


def test_load_clip_retimes_gold(tmp_path):
    write_one_clip(tmp_path, "clip", seed=5, fps=50.0)
    (stem, pose_path, seg_path) = list_pairs(tmp_path)[0]
    clip = load_clip(stem, pose_path, seg_path, PipelineOptions(fps=25.0))
    _, tiers = load_segments(seg_path)
    # 50 -> 25 halves both the clip and the annotation timeline
    assert clip.features.shape[0] == 40
    first = round_half_away(min(s.start for s in tiers["sign"]) * 25.0 / 50.0)
    assert clip.gold["sign"][:first] == [O] * first
    assert clip.gold["sign"][first] == B
    assert len(clip.gold["sign"]) == 40


def test_load_corpus_rejects_mixed_widths(tmp_path):
    write_one_clip(tmp_path, "normal")
    comps = holistic_components()
    total = sum(len(c.points) for c in comps)
    rng = np.random.default_rng(0)
    seq = make_pose(25.0, comps, rng.normal(size=(6, total, 3)), np.ones((6, total)))
    save_pose(tmp_path / "wide.pose.json", seq)
    save_segments(tmp_path / "wide.segments.json", 25.0, {"sign": [], "phrase": []})
    with pytest.raises(ValueError, match="feature width"):
        load_corpus(tmp_path, PipelineOptions())


def tiny_corpus(tmp_path, n=3):
    write_clip_dir(tmp_path, seeds=range(n))
    clips = load_corpus(tmp_path, PipelineOptions())
    cfg = TaggerConfig(input_dim=clips[0].features.shape[1], hidden_dim=8, layers=1,
                       class_weights=corpus_class_weights(clips), seed=0)
    return clips, cfg


def test_corpus_class_weights_shape(tmp_path):
    clips, cfg = tiny_corpus(tmp_path)
    for tier in ("sign", "phrase"):
        w = cfg.class_weights[tier]
        assert len(w) == 3 and all(v > 0 for v in w)


def test_mean_frame_f1_range(tmp_path):
    clips, cfg = tiny_corpus(tmp_path)
    assert 0.0 <= mean_frame_f1(init_model(cfg), clips) <= 1.0


def test_train_honors_max_steps(tmp_path):
    clips, cfg = tiny_corpus(tmp_path)
    result = train(init_model(cfg), clips, clips, max_steps=5, patience=0)
    assert result.steps == 5
    assert result.stopped == "max_steps"
    assert result.history[-1].val_f1 is not None  # evaluated at the cap


def test_train_early_stops_when_nothing_improves(tmp_path):
    clips, cfg = tiny_corpus(tmp_path)
    frozen = TaggerConfig(input_dim=cfg.input_dim, hidden_dim=8, layers=1,
                          learning_rate=0.0, class_weights=cfg.class_weights)
    result = train(init_model(frozen), clips, clips, max_steps=0, patience=2)
    assert result.stopped == "early"
    # first eval sets the best; two flat evals end epoch 3
    assert result.steps == 3 * len(clips)
    assert result.best_step == len(clips)


def test_train_returns_best_parameters(tmp_path):
    clips, cfg = tiny_corpus(tmp_path)
    result = train(init_model(cfg), clips, clips, max_steps=3 * len(clips), patience=0)
    assert mean_frame_f1(result.model, clips) == pytest.approx(result.best_val_f1)


def test_train_input_validation(tmp_path):
    clips, cfg = tiny_corpus(tmp_path, n=1)
    model = init_model(cfg)
    with pytest.raises(ValueError, match="training set"):
        train(model, [], clips)
    with pytest.raises(ValueError, match="validation set"):
        train(model, clips, [])
    with pytest.raises(ValueError, match="max_steps or patience"):
        train(model, clips, clips, max_steps=0, patience=0)
    with pytest.raises(ValueError, match="val_every"):
        train(model, clips, clips, max_steps=1, val_every=0)


def test_write_log_format(tmp_path):
    history = [EpochRow(1, 3, 0.5, None), EpochRow(2, 6, 0.25, 1.0)]
    path = tmp_path / "log.csv"
    write_log(path, history)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,step,train_loss,val_f1"
    assert lines[1] == "1,3,0.500000,"
    assert lines[2] == "2,6,0.250000,1.000000"
