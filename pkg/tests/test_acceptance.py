"""Acceptance suite: one test per criterion, each printing a pass/fail line
and enforcing its runtime budget. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import time
from collections import Counter
from contextlib import contextmanager

import numpy as np
import pytest

import oracles
from helpers import POSE_TEMPLATE, random_people

from ymap.arch import (
    GraphSpec,
    LayerSpec,
    build_ymap_graph,
    count_parameters,
    infer_shapes,
    validate_topology,
)
from ymap.augment import AugmentConfig, AugmentSample, augment, sample_rng
from ymap.captions import STOP_WORDS, build_vocab, decode_tokens, encode_caption
from ymap.coco import AnnotationRecord, SegShape, default_class_groups, rasterize_mask
from ymap.depth import RefineParams, normals_from_depth, refine_depth
from ymap.grids import ScaleOffset
from ymap.loss import LossConfig, TERM_ORDER, hdm, multiterm_loss
from ymap.pose import decode_stack
from ymap.targets import (
    JOINT_SIZE_SCHEDULE,
    PAF_WIDTH_SCHEDULE,
    TargetStack,
    decay_at_epoch,
    synth_group_masks,
    synth_joint_heatmaps,
    synth_pafs,
)
from ymap import kernels


@contextmanager
def criterion(num, desc, budget_s):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[FAIL] criterion {num}: {desc}")
        raise
    dt = time.perf_counter() - t0
    assert dt < budget_s, f"criterion {num} budget {budget_s}s exceeded: {dt:.2f}s"
    print(f"[PASS] criterion {num}: {desc} ({dt:.2f}s)")


def _zero_stack():
    return TargetStack(np.zeros((44, 256, 256), np.float32), np.zeros((8, 300), np.float32))


def test_criterion_1_loss_constants():
    with criterion(1, "loss gains and single-term closed form", 1.0):
        config = LossConfig()
        assert config.gains == {
            "tokens": 10.0, "joints": 2.4, "pafs": 0.8, "depth": 1.0,
            "normals": 1.0, "text": 1.0, "groups": 3.0,
        }
        sizes = {
            "tokens": 8 * 300,
            "joints": 17 * 256 * 256,
            "pafs": 12 * 256 * 256,
            "depth": 256 * 256,
            "normals": 3 * 256 * 256,
            "text": 256 * 256,
            "groups": 10 * 256 * 256,
        }
        for term in TERM_ORDER:
            truth = _zero_stack()
            pred = _zero_stack()
            if term == "tokens":
                pred.tokens[0, 0] = 1.0
            else:
                first = {"joints": 0, "pafs": 17, "depth": 29, "normals": 30,
                         "text": 33, "groups": 34}[term]
                pred.channels[first, 10, 10] = 1.0
            total, per_term = multiterm_loss(pred, truth, config)
            expected = config.weight * config.gains[term] * (1.0 / sizes[term])
            assert abs(total - expected) <= 1e-12, term
            assert all(per_term[t] == 0.0 for t in TERM_ORDER if t != term)


def test_criterion_2_hdm_brute_force():
    with criterion(2, "hdm equals brute-force counting on 1000 random pairs", 5.0):
        rng = np.random.default_rng(202)
        for i in range(1000):
            a = rng.random((16, 16))
            b = rng.random((16, 16))
            for t in (0.1, 0.3, 0.5, 0.8):
                assert hdm(a, b, t) == oracles.brute_hdm(a, b, t)


def test_criterion_3_refinement_fixed_point_and_improvement():
    # warm the oracle's jit outside the timed block
    tiny = np.full((8, 8), 0.5)
    oracles.scalar_refine(tiny, tiny * 0, tiny * 0, tiny * 0 + 1, 0.05, 1, 0.01)
    with criterion(3, "refinement fixed point, improvement, scalar-oracle match", 10.0):
        flat = np.full((256, 256), 0.5)
        ident = np.zeros((3, 256, 256))
        ident[2] = 1.0
        params = RefineParams(iterations=35, alpha=0.01)
        out = refine_depth(flat, ident, params)
        assert np.array_equal(out, flat), "flat depth must be bit-unchanged"

        w = 256
        ramp = 0.1 + 0.8 * np.tile(np.arange(w) / (w - 1), (w, 1))
        normals = normals_from_depth(ramp).astype(np.float64)
        rng = np.random.default_rng(303)
        noisy = np.clip(ramp + rng.uniform(0.0, 0.02, ramp.shape), 0.0, 1.0)
        refined = refine_depth(noisy, normals, params)
        err_in = np.abs(noisy - ramp).mean()
        err_out = np.abs(refined - ramp).mean()
        assert err_out < err_in, f"error must strictly decrease: {err_in} -> {err_out}"

        expected = oracles.scalar_refine(
            noisy, normals[0], normals[1], normals[2],
            params.far_mask_threshold, params.iterations, params.alpha,
        )
        assert np.abs(refined - expected).max() < 1e-6


def test_criterion_4_normal_validity():
    with criterion(4, "unit-norm normals on 100 random smooth maps", 10.0):
        rng = np.random.default_rng(404)
        for _ in range(100):
            coarse = rng.uniform(0.1, 0.9, (1, 8, 8))
            depth = kernels.affine_warp(coarse, 8 / 128, 0.0, 0.0, 128, 128)[0]
            n = normals_from_depth(depth).astype(np.float64)
            norms = np.sqrt((n ** 2).sum(axis=0))
            assert np.abs(norms - 1.0).max() < 1e-4
            assert n[2].min() >= 0.0


def test_criterion_5_pose_round_trip():
    with criterion(5, "synth->decode pose round trip over 200 fixtures", 60.0):
        rng = np.random.default_rng(505)
        joints_total = 0
        joints_recovered = 0
        count_correct = 0
        n_fixtures = 200
        for _ in range(n_fixtures):
            n_people = int(rng.integers(1, 4))
            people = random_people(rng, n_people)
            hm = synth_joint_heatmaps(people, epoch=0)
            pf = synth_pafs(people, epoch=0)
            decoded = decode_stack(hm, pf)
            if len(decoded) == n_people:
                count_correct += 1
            for person in people:
                truth = person.joints
                joints_total += len(POSE_TEMPLATE)
                for j in POSE_TEMPLATE:
                    tx, ty = truth[j, 0], truth[j, 1]
                    hit = any(
                        j in sk.keypoints
                        and abs(sk.keypoints[j].x - tx) <= 1.0
                        and abs(sk.keypoints[j].y - ty) <= 1.0
                        for sk in decoded
                    )
                    joints_recovered += hit
        assert joints_recovered / joints_total >= 0.95, (
            f"joint recovery {joints_recovered / joints_total:.3f}"
        )
        assert count_correct / n_fixtures >= 0.95, (
            f"person count correct in {count_correct}/{n_fixtures}"
        )


def test_criterion_6_caption_round_trip(big_table, big_corpus):
    with criterion(6, "caption codec round trip with a 2048-word vocabulary", 30.0):
        vocab = build_vocab(big_corpus, big_table, k=2048)
        assert len(vocab) == 2048
        assert vocab.stop_words == STOP_WORDS and len(STOP_WORDS) == 19

        rng = np.random.default_rng(606)
        stop_list = sorted(STOP_WORDS)
        for _ in range(500):
            n_words = int(rng.integers(1, 13))
            words = [vocab.words[int(i)] for i in rng.integers(0, 2048, n_words)]
            mixed = []
            for w in words:
                mixed.append(w)
                if rng.random() < 0.3:
                    mixed.append(stop_list[int(rng.integers(0, len(stop_list)))])
            caption = " ".join(mixed)
            pred = encode_caption(caption, vocab, big_table)
            decoded = decode_tokens(pred, big_table, vocab, norm_thresh=0.01, sim_thresh=0.5)
            encoded_words = []
            for w in words:
                if w not in encoded_words:
                    encoded_words.append(w)
            encoded_words = encoded_words[:8]
            assert Counter(w for w, _ in decoded) == Counter(encoded_words)

        for idx in range(0, 2048, 128):
            word = vocab.words[idx]
            pred = np.zeros((8, 300))
            pred[0] = big_table.vector(word)
            decoded = decode_tokens(pred, big_table, vocab)
            assert decoded[0][0] == word
            assert abs(decoded[0][1] - 1.0) < 1e-12


def test_criterion_7_decay_schedules():
    with criterion(7, "decay schedules: 23 start, 6x6 floor, PAF 6->2", 1.0):
        assert decay_at_epoch(JOINT_SIZE_SCHEDULE, 0) == 23
        assert decay_at_epoch(JOINT_SIZE_SCHEDULE, 10 ** 6) == 6
        assert decay_at_epoch(PAF_WIDTH_SCHEDULE, 0) == 6
        assert decay_at_epoch(PAF_WIDTH_SCHEDULE, 80) == 2
        assert decay_at_epoch(PAF_WIDTH_SCHEDULE, 10 ** 6) == 2
        for k in range(1, 18):
            at_boundary = decay_at_epoch(JOINT_SIZE_SCHEDULE, 20 * k)
            before = decay_at_epoch(JOINT_SIZE_SCHEDULE, 20 * k - 1)
            assert before == decay_at_epoch(JOINT_SIZE_SCHEDULE, 20 * (k - 1))
            assert at_boundary == max(6, 23 - k)


def test_criterion_8_augmentation_statistics():
    with criterion(8, "augmentation firing rates over 10,000 seeded samples", 120.0):
        n = 10_000
        master = 808
        base_image = np.random.default_rng(0).random((3, 256, 256)).astype(np.float32)
        people_pool = [random_people(np.random.default_rng(i), (i % 3) + 1) for i in range(8)]
        config = AugmentConfig(rng_seed=master)

        fired = Counter()
        person_free = 0
        replace_fired = 0
        outputs = []
        for i in range(n):
            with_person = i % 2 == 0
            skels = people_pool[i % 8] if with_person else []
            sample = AugmentSample(image=base_image, skeletons=skels)
            out, record = augment(sample, config, rng=sample_rng(master, i))
            ops = {op["op"]: op for op in record["ops"]}
            for name in ops:
                fired[name] += 1
            if not with_person:
                person_free += 1
                replace_fired += "noise_replace" in ops
            pz = ops.get("pan_zoom")
            if pz is not None and pz["applied"]:
                assert pz["zoom"] <= 1.10 + 1e-12
                for skel in out.skeletons:
                    pts = skel.joints[skel.annotated_mask(), :2]
                    inside = (
                        (pts[:, 0] >= 0) & (pts[:, 0] < 256)
                        & (pts[:, 1] >= 0) & (pts[:, 1] < 256)
                    )
                    assert inside.mean() >= 0.30
            if i < 50:
                outputs.append(out.image.tobytes())

        for name, p in (("pan_zoom", 0.45), ("brightness", 0.50),
                        ("gauss_noise", 0.15), ("burn", 0.50)):
            sd = (p * (1 - p) / n) ** 0.5
            rate = fired[name] / n
            assert abs(rate - p) <= 3 * sd, f"{name}: {rate:.4f} vs {p}"
        sd = (0.01 * 0.99 / person_free) ** 0.5
        rate = replace_fired / person_free
        assert abs(rate - 0.01) <= 3 * sd, f"noise_replace: {rate:.4f}"

        # identical seeds -> byte-identical outputs
        for i in range(50):
            with_person = i % 2 == 0
            skels = people_pool[i % 8] if with_person else []
            sample = AugmentSample(image=base_image, skeletons=skels)
            out, _ = augment(sample, config, rng=sample_rng(master, i))
            assert out.image.tobytes() == outputs[i]


def test_criterion_9_architecture_checks():
    with criterion(9, "default 1-8-44 graph valid; parameter closed forms", 5.0):
        g = build_ymap_graph()
        assert validate_topology(g) == []
        report = infer_shapes(g)
        assert report.out_shapes[g.pictorial_output] == (256, 256, 44)
        assert report.out_shapes[g.token_output] == (8, 300)

        # five closed-form hand calculations
        g1 = GraphSpec(input_shape=(16, 16, 3))
        g1.add_layer("c", LayerSpec("conv3x3", filters=16), "input")
        assert count_parameters(g1)[0] == (9 * 3 + 1) * 16 == 448

        g2 = GraphSpec(input_shape=(10,))
        g2.add_layer("d", LayerSpec("dense", filters=5), "input")
        assert count_parameters(g2)[0] == (10 + 1) * 5 == 55

        g3 = GraphSpec(input_shape=(4, 4, 1))
        assert count_parameters(g3)[0] == 0

        g4 = GraphSpec(input_shape=(4, 4, 8))
        g4.add_layer("c", LayerSpec("conv1x1", filters=20), "input")
        g4.add_layer("d", LayerSpec("dense", filters=7), "c")
        assert count_parameters(g4)[0] == (8 + 1) * 20 + (4 * 4 * 20 + 1) * 7 == 2427

        g5 = GraphSpec(input_shape=(8, 8, 3))
        g5.add_layer("c1", LayerSpec("conv3x3", filters=4), "input")
        g5.add_layer("a", LayerSpec("activation", activation="leaky_relu"), "c1")
        g5.add_layer("c2", LayerSpec("conv3x3", filters=6), "a")
        assert count_parameters(g5)[0] == 112 + 222 == 334


def test_criterion_10_segmentation_grouping():
    with criterion(10, "group-mask unions vs oracle; table total over 183 ids", 10.0):
        table = default_class_groups()
        assert set(table.id_to_group.keys()) == set(range(1, 184))
        assert set(table.id_to_group.values()) == set(range(11))

        rng = np.random.default_rng(1010)
        for _ in range(50):
            rec = AnnotationRecord(image_id=1, height=256, width=256)
            per_channel_masks = {}
            n_instances = int(rng.integers(2, 6))
            for _ in range(n_instances):
                cid = int(rng.integers(1, 184))
                x, y = rng.uniform(5, 180, 2)
                w, h = rng.uniform(10, 70, 2)
                poly = np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]])
                rec.shapes.append(SegShape(cid, polygon=poly))
                mask = rasterize_mask(SegShape(cid, polygon=poly), 256, 256)
                group = table.group_of(cid)
                channel = 0 if group == 10 else group + 1  # text first, then groups
                per_channel_masks.setdefault(channel, []).append(mask)
            produced = synth_group_masks(rec, table, transform=ScaleOffset())
            for ch in range(11):
                if ch in per_channel_masks:
                    expected = oracles.max_union(per_channel_masks[ch])
                    assert np.array_equal(produced[ch], expected)
                else:
                    assert produced[ch].sum() == 0
