import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from ymap.cli import main
from ymap.grids import write_depth16
from ymap.targets import TargetStack, save_stack

from helpers import coco_fixture, write_embedding_file


@pytest.fixture
def runner():
    return CliRunner()


def test_arch_check_default_preset(runner, tmp_path):
    result = runner.invoke(main, ["--root", str(tmp_path), "arch-check", "--preset", "ymap-1-8-44"])
    assert result.exit_code == 0, result.output
    assert "256x256x44" in result.output
    assert "8x300" in result.output
    assert "OK (0 violations)" in result.output


def test_arch_check_json_report(runner, tmp_path):
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "arch-check", "--preset", "ymap-mid-5-256",
         "--json", "report.json"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["violations"] == []
    assert payload["total_params"] > 0


def test_ingest_writes_summary_and_manifest(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    result = runner.invoke(
        main, ["--root", str(tmp_path), "ingest", "--annotations", str(ann), "--out", "records.json"]
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "records.json").read_text())
    assert len(summary) == 2
    assert summary[0]["skeletons"] == 1
    manifest = json.loads((tmp_path / "records.json.manifest.json").read_text())
    assert manifest["command"] == "ingest"
    assert "numpy" in manifest["versions"]


def test_ingest_missing_input_exit_code(runner, tmp_path):
    result = runner.invoke(
        main, ["--root", str(tmp_path), "ingest", "--annotations", "missing.json", "--out", "o.json"]
    )
    assert result.exit_code == 3


def test_unknown_command_distinct_exit_code(runner):
    result = runner.invoke(main, ["no-such-command"])
    assert result.exit_code == 4


def test_invalid_flag_usage_error(runner):
    result = runner.invoke(main, ["arch-check", "--bogus-flag", "x"])
    assert result.exit_code == 2


def test_synth_targets_config_file(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    (tmp_path / "pipeline.json").write_text(
        json.dumps({"epoch": 0, "seed": 3, "joint_schedule": {"start_size": 11, "end_size": 5}})
    )
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "synth-targets", "--annotations", str(ann),
         "--out", "cfg_stacks", "--config", "pipeline.json"],
    )
    assert result.exit_code == 0, result.output
    from ymap.targets import load_stack

    stack = load_stack(tmp_path / "cfg_stacks" / "1.bin")
    ys, xs = np.nonzero(stack.channels[5])  # left shoulder heatmap
    assert xs.max() - xs.min() + 1 == 11  # schedule override applied


def test_augment_preview_config_file(runner, tmp_path):
    rng = np.random.default_rng(4)
    img = (rng.random((64, 64, 3)) * 255).astype(np.uint8)
    Image.fromarray(img).save(tmp_path / "img.png")
    (tmp_path / "aug.json").write_text(json.dumps({"p_burn": 1.0, "max_burned": 2}))
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "augment-preview", "--image", "img.png",
         "--out", "aug", "--count", "2", "--seed", "1", "--config", "aug.json"],
    )
    assert result.exit_code == 0, result.output
    records = [json.loads((tmp_path / "aug" / f"aug_{i:03d}.json").read_text()) for i in range(2)]
    burns = [op for r in records for op in r["ops"] if op["op"] == "burn"]
    assert burns and all(op["count"] <= 2 for op in burns)


def test_synth_then_decode_pose_round_trip(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "synth-targets", "--annotations", str(ann),
         "--out", "stacks", "--epoch", "0"],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "stacks" / "1.bin").exists()
    assert (tmp_path / "stacks" / "manifest.json").exists()

    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "decode-pose", "--stack", "stacks/1.bin",
         "--out", "skeletons.json"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "skeletons.json").read_text())
    assert len(payload["skeletons"]) == 1
    joints = payload["skeletons"][0]["joints"]
    assert joints[5] is not None  # left shoulder recovered


def test_refine_command(runner, tmp_path):
    rng = np.random.default_rng(0)
    depth = np.clip(0.3 + 0.4 * rng.random((64, 64)), 0, 1).astype(np.float32)
    write_depth16(depth, tmp_path / "in.png")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "refine", "--depth", "in.png", "--iters", "5",
         "--alpha", "0.01", "--out", "out.png"],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out.png").exists()
    assert (tmp_path / "out.png.manifest.json").exists()


def test_refine_with_normal_files(runner, tmp_path):
    depth = np.full((32, 32), 0.5, dtype=np.float32)
    write_depth16(depth, tmp_path / "in.png")
    # identity normals (0, 0, 1) encoded into 16-bit planes of (v+1)/2
    write_depth16(np.full((32, 32), 0.5), tmp_path / "nx.png")
    write_depth16(np.full((32, 32), 0.5), tmp_path / "ny.png")
    write_depth16(np.full((32, 32), 1.0), tmp_path / "nz.png")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "refine", "--depth", "in.png",
         "--normals", "nx.png,ny.png,nz.png", "--out", "out.png"],
    )
    assert result.exit_code == 0, result.output
    out = np.asarray(Image.open(tmp_path / "out.png"))
    assert (out == 32768).all()  # flat fixed point survives the CLI path


def test_eval_identical_dirs_all_ones(runner, tmp_path):
    rng = np.random.default_rng(1)
    stack = TargetStack(
        rng.uniform(0, 1, (44, 256, 256)).astype(np.float32),
        rng.uniform(-1, 1, (8, 300)).astype(np.float32),
    )
    for d in ("pred", "truth"):
        (tmp_path / d).mkdir()
        save_stack(stack, tmp_path / d / "1.bin")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "eval", "--pred", "pred", "--truth", "truth",
         "--metric", "hdm", "--T", "0.1"],
    )
    assert result.exit_code == 0, result.output
    for row in ("Joints", "PAFs", "Depth", "Normals", "Text Seg.", "Class Seg."):
        line = next(l for l in result.output.splitlines() if l.startswith(row))
        assert "1.0000" in line


def test_augment_preview(runner, tmp_path):
    rng = np.random.default_rng(2)
    img = (rng.random((120, 200, 3)) * 255).astype(np.uint8)
    Image.fromarray(img).save(tmp_path / "img.png")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "augment-preview", "--image", "img.png",
         "--out", "aug", "--count", "3", "--seed", "9"],
    )
    assert result.exit_code == 0, result.output
    for i in range(3):
        assert (tmp_path / "aug" / f"aug_{i:03d}.png").exists()
        record = json.loads((tmp_path / "aug" / f"aug_{i:03d}.json").read_text())
        assert "ops" in record


def test_decode_captions_round_trip(runner, tmp_path):
    rng = np.random.default_rng(3)
    words = ["cat", "dog", "mat"] + [f"w{i}" for i in range(20)]
    emb_path = write_embedding_file(tmp_path / "emb.txt", words, rng)
    from ymap.captions import build_vocab, encode_caption, load_embeddings, save_vocab

    table = load_embeddings(emb_path)
    vocab = build_vocab(["cat dog mat"], table)
    save_vocab(vocab, table, tmp_path / "vocab.txt")
    tokens = encode_caption("a cat and a dog", vocab, table)
    stack = TargetStack(np.zeros((44, 256, 256), np.float32), tokens)
    save_stack(stack, tmp_path / "s.bin")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "decode-captions", "--stack", "s.bin",
         "--embeddings", "emb.txt", "--vocab", "vocab.txt", "--out", "cap.json"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "cap.json").read_text())
    assert [e["word"] for e in payload] == ["cat", "dog"]


def test_synth_targets_reproducible_bytes(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    for d, jobs in (("run1", "1"), ("run2", "1"), ("run3", "2")):
        result = runner.invoke(
            main,
            ["--root", str(tmp_path), "synth-targets", "--annotations", str(ann),
             "--out", d, "--epoch", "0", "--seed", "5", "--jobs", jobs],
        )
        assert result.exit_code == 0, result.output
    b1 = (tmp_path / "run1" / "1.bin").read_bytes()
    assert b1 == (tmp_path / "run2" / "1.bin").read_bytes()
    assert b1 == (tmp_path / "run3" / "1.bin").read_bytes()  # --jobs does not change output


def test_synth_targets_paths_from_config(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    (tmp_path / "full.json").write_text(
        json.dumps({"annotations": [str(ann)], "out": "from_cfg", "epoch": 0, "seed": 1})
    )
    result = runner.invoke(
        main, ["--root", str(tmp_path), "synth-targets", "--config", "full.json"]
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "from_cfg" / "1.bin").exists()
    manifest = json.loads((tmp_path / "from_cfg" / "manifest.json").read_text())
    assert manifest["seed"] == 1


def test_synth_targets_with_teacher_maps(runner, tmp_path):
    ann = coco_fixture(tmp_path)
    teacher = tmp_path / "teachers"
    (teacher / "depth").mkdir(parents=True)
    (teacher / "text").mkdir()
    (teacher / "groups").mkdir()
    rng = np.random.default_rng(7)
    write_depth16(rng.uniform(0.2, 0.9, (240, 320)), teacher / "depth" / "1.png")
    text = np.zeros((240, 320), dtype=np.uint8)
    text[40:80, 40:80] = 255
    Image.fromarray(text).save(teacher / "text" / "1.png")
    nature = np.zeros((240, 320), dtype=np.uint8)
    nature[200:240, 0:100] = 255
    Image.fromarray(nature).save(teacher / "groups" / "1_9.png")  # Nature group

    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "synth-targets", "--annotations", str(ann),
         "--out", "tstacks", "--teacher-root", "teachers"],
    )
    assert result.exit_code == 0, result.output
    from ymap.targets import load_stack

    stack = load_stack(tmp_path / "tstacks" / "1.bin")
    assert stack.depth.max() > 0
    norms = np.sqrt((stack.normals.astype(np.float64) ** 2).sum(axis=0))
    assert np.abs(norms - 1.0).max() < 1e-4
    assert stack.text.sum() > 0  # teacher text landed on channel 33
    assert stack.channels[43].sum() > 0  # Nature group (last channel)


def test_eval_loss_metric(runner, tmp_path):
    rng = np.random.default_rng(6)
    stack = TargetStack(
        rng.uniform(0, 1, (44, 256, 256)).astype(np.float32),
        rng.uniform(-1, 1, (8, 300)).astype(np.float32),
    )
    for d in ("lp", "lt"):
        (tmp_path / d).mkdir()
        save_stack(stack, tmp_path / d / "1.bin")
    result = runner.invoke(
        main,
        ["--root", str(tmp_path), "eval", "--pred", "lp", "--truth", "lt",
         "--metric", "loss"],
    )
    assert result.exit_code == 0, result.output
    total_line = next(l for l in result.output.splitlines() if l.startswith("total"))
    assert "0.0000" in total_line
