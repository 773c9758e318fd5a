"""Command-line front end.

Every command writes a manifest (inputs, seed, versions, timing) next to
its outputs so stochastic pipelines can be audited and reproduced. Exit
codes: 0 success, 1 runtime failure, 2 invalid flags, 3 missing input,
4 unknown command.
"""

import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import __version__, kernels
from . import captions as cap
from .arch import (
    PRESETS,
    build_ymap_graph,
    config_from_json,
    format_report,
    infer_shapes,
    report_to_json,
    validate_topology,
)
from .augment import AugmentConfig, AugmentSample, augment, sample_rng
from .coco import (
    ClassGroupTable,
    default_class_groups,
    letterbox,
    letterbox_transform,
    load_teacher_maps,
    parse_annotations,
    SkeletonAnnotation,
)
from .depth import RefineParams, normals_from_depth, refine_depth
from .grids import atomic_write_bytes, read_depth16, write_depth16
from .loss import LossConfig, multiterm_loss
from .loss import hdm as hdm_metric
from .pose import decode_stack, skeletons_to_json
from .targets import (
    DEPTH_CHANNEL,
    GROUP_CHANNELS,
    JOINT_CHANNELS,
    JOINT_SIZE_SCHEDULE,
    NORMAL_CHANNELS,
    PAF_CHANNELS,
    PAF_WIDTH_SCHEDULE,
    TEXT_CHANNEL,
    DecaySchedule,
    assemble_targets,
    load_stack,
    save_stack,
    synth_group_masks,
    synth_joint_heatmaps,
    synth_pafs,
)

EXIT_MISSING_INPUT = 3
EXIT_UNKNOWN_COMMAND = 4


class MissingInput(click.ClickException):
    exit_code = EXIT_MISSING_INPUT


class _Group(click.Group):
    def resolve_command(self, ctx, args):
        try:
            return super().resolve_command(ctx, args)
        except click.UsageError as exc:
            wrapped = click.ClickException(exc.format_message())
            wrapped.exit_code = EXIT_UNKNOWN_COMMAND
            raise wrapped from exc


@click.group(cls=_Group)
@click.option("--root", type=click.Path(), default=".", help="Base directory for relative paths.")
@click.pass_context
def main(ctx, root):
    """Pipelines around the multi-attribute target stack."""
    ctx.ensure_object(dict)
    ctx.obj["root"] = Path(root)


def _resolve(ctx, path):
    p = Path(path)
    return p if p.is_absolute() else ctx.obj["root"] / p


def _require(path, what):
    if not Path(path).exists():
        raise MissingInput(f"{what} not found: {path}")
    return Path(path)


def _write_manifest(path, command, params, seed=None, started=None):
    def jsonable(v):
        if isinstance(v, (list, tuple)):
            return [str(x) for x in v]
        return v if isinstance(v, (int, float, bool, type(None))) else str(v)

    manifest = {
        "command": command,
        "params": {k: jsonable(v) for k, v in params.items()},
        "seed": seed,
        "versions": {"ymap": __version__, "numpy": np.__version__, "backend": kernels.BACKEND},
        "wall_seconds": None if started is None else round(time.perf_counter() - started, 4),
    }
    atomic_write_bytes(path, json.dumps(manifest, indent=2).encode())


def _load_group_table(path):
    if path is None:
        return default_class_groups()
    return ClassGroupTable.from_file(_require(path, "class-group table"))


def _schedule_from(fields, default):
    if not fields:
        return default
    return DecaySchedule(
        start_size=int(fields.get("start_size", default.start_size)),
        end_size=int(fields.get("end_size", default.end_size)),
        epochs_per_step=int(fields.get("epochs_per_step", default.epochs_per_step)),
        step=int(fields.get("step", default.step)),
    )


@main.command()
@click.option("--annotations", "ann_paths", multiple=True, required=True, type=click.Path())
@click.option("--class-groups", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def ingest(ctx, ann_paths, class_groups, out_path):
    """Parse COCO annotation files and write a per-image summary."""
    started = time.perf_counter()
    paths = [_require(_resolve(ctx, p), "annotation file") for p in ann_paths]
    table = _load_group_table(class_groups and _resolve(ctx, class_groups))
    records = parse_annotations(*paths, table=table)
    summary = [
        {
            "image_id": r.image_id,
            "height": r.height,
            "width": r.width,
            "skeletons": len(r.skeletons),
            "shapes": len(r.shapes),
            "captions": len(r.captions),
        }
        for r in records
    ]
    out = _resolve(ctx, out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(out, json.dumps(summary, indent=2).encode())
    _write_manifest(Path(str(out) + ".manifest.json"), "ingest",
                    {"annotations": list(paths)}, started=started)
    click.echo(f"wrote {len(summary)} records to {out}")


@main.command("synth-targets")
@click.option("--annotations", "ann_paths", multiple=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Pipeline config JSON; explicit flags override its values.")
@click.option("--epoch", default=None, type=int, help="Overrides the config value; default 0.")
@click.option("--teacher-root", type=click.Path(), default=None)
@click.option("--class-groups", type=click.Path(), default=None)
@click.option("--embeddings", type=click.Path(), default=None)
@click.option("--vocab", type=click.Path(), default=None)
@click.option("--seed", default=None, type=int, help="Master seed; overrides the config value.")
@click.option("--jobs", default=1, show_default=True, type=int)
@click.pass_context
def synth_targets(ctx, ann_paths, out_dir, config_path, epoch, teacher_root,
                  class_groups, embeddings, vocab, seed, jobs):
    """Build one target stack per annotated image."""
    started = time.perf_counter()
    pipeline = {}
    if config_path:
        with open(_require(_resolve(ctx, config_path), "pipeline config")) as fh:
            pipeline = json.load(fh)
    ann_paths = list(ann_paths) or pipeline.get("annotations", [])
    out_dir = out_dir or pipeline.get("out")
    if not ann_paths or not out_dir:
        raise click.UsageError("need --annotations and --out (flags or config file)")
    teacher_root = teacher_root or pipeline.get("teacher_root")
    class_groups = class_groups or pipeline.get("class_groups")
    embeddings = embeddings or pipeline.get("embeddings")
    vocab = vocab or pipeline.get("vocab")
    epoch = epoch if epoch is not None else int(pipeline.get("epoch", 0))
    seed = seed if seed is not None else int(pipeline.get("seed", 0))
    joint_schedule = _schedule_from(pipeline.get("joint_schedule"), JOINT_SIZE_SCHEDULE)
    paf_schedule = _schedule_from(pipeline.get("paf_schedule"), PAF_WIDTH_SCHEDULE)

    paths = [_require(_resolve(ctx, p), "annotation file") for p in ann_paths]
    table = _load_group_table(class_groups and _resolve(ctx, class_groups))
    records = parse_annotations(*paths, table=table)
    out = _resolve(ctx, out_dir)
    out.mkdir(parents=True, exist_ok=True)

    embed_table = vocab_obj = None
    if embeddings and vocab:
        embed_table = cap.load_embeddings(_require(_resolve(ctx, embeddings), "embedding file"))
        vocab_obj = cap.load_vocab(_require(_resolve(ctx, vocab), "vocabulary file"))

    teacher = Path(_resolve(ctx, teacher_root)) if teacher_root else None

    def build_one(record):
        fwd = letterbox_transform(record.height, record.width)
        skels = []
        for s in record.skeletons:
            joints = s.joints.copy()
            joints[:, :2] = fwd.apply(joints[:, :2])
            skels.append(SkeletonAnnotation(joints))
        joint_maps = synth_joint_heatmaps(skels, epoch=epoch, schedule=joint_schedule)
        paf_maps = synth_pafs(skels, epoch=epoch, schedule=paf_schedule)
        group_maps = synth_group_masks(record, table, transform=fwd)
        depth = np.zeros((256, 256), dtype=np.float32)
        normals = np.zeros((3, 256, 256), dtype=np.float32)
        if teacher is not None:
            tm = load_teacher_maps(teacher, record.image_id)
            if tm["depth"] is not None:
                depth, _ = letterbox(tm["depth"])
                normals = normals_from_depth(depth)
            if tm["text"] is not None:
                text_box, _ = letterbox(tm["text"])
                np.maximum(group_maps[0], (text_box >= 0.5).astype(np.float32),
                           out=group_maps[0])
            for g, mask in tm["groups"].items():
                boxed, _ = letterbox(mask)
                channel = 0 if g == 10 else g + 1  # table order: Persons..Text
                np.maximum(group_maps[channel], (boxed >= 0.5).astype(np.float32),
                           out=group_maps[channel])
        tokens = None
        if embed_table is not None and record.captions:
            tokens = cap.encode_caption(record.captions[0], vocab_obj, embed_table)
        stack = assemble_targets(joint_maps, paf_maps, depth, normals, group_maps, tokens)
        save_stack(stack, out / f"{record.image_id}.bin")
        return record.image_id

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(build_one, records))
    else:
        done = [build_one(r) for r in records]
    _write_manifest(out / "manifest.json", "synth-targets",
                    {"annotations": list(paths), "epoch": epoch, "count": len(done)},
                    seed=seed, started=started)
    click.echo(f"wrote {len(done)} stacks to {out}")


@main.command()
@click.option("--depth", "depth_path", required=True, type=click.Path())
@click.option("--normals", "normals_paths", default=None,
              help="Comma-separated nx.png,ny.png,nz.png (16-bit, [-1,1] mapped to [0,65535]).")
@click.option("--iters", default=35, show_default=True, type=int)
@click.option("--alpha", default=0.01, show_default=True, type=float)
@click.option("--far-threshold", default=0.05, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def refine(ctx, depth_path, normals_paths, iters, alpha, far_threshold, out_path):
    """Iterative normal-guided refinement of a 16-bit depth PNG."""
    started = time.perf_counter()
    dpath = _require(_resolve(ctx, depth_path), "depth file")
    depth = read_depth16(dpath)
    if normals_paths:
        parts = [p.strip() for p in normals_paths.split(",")]
        if len(parts) != 3:
            raise click.BadParameter("expected three comma-separated normal files")
        planes = [read_depth16(_require(_resolve(ctx, p), "normal file")) * 2.0 - 1.0
                  for p in parts]
        normals = np.stack(planes).astype(np.float32)
    else:
        normals = normals_from_depth(depth)
    params = RefineParams(iterations=iters, alpha=alpha, far_mask_threshold=far_threshold)
    refined = refine_depth(depth, normals, params)
    out = _resolve(ctx, out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_depth16(refined, out)
    _write_manifest(Path(str(out) + ".manifest.json"), "refine",
                    {"depth": dpath, "iters": iters, "alpha": alpha}, started=started)
    click.echo(f"refined depth written to {out}")


@main.command("decode-pose")
@click.option("--stack", "stack_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--peak-threshold", default=0.3, show_default=True, type=float)
@click.option("--limb-threshold", default=0.25, show_default=True, type=float)
@click.option("--samples", default=10, show_default=True, type=int)
@click.pass_context
def decode_pose(ctx, stack_path, out_path, peak_threshold, limb_threshold, samples):
    """Assemble skeletons from the joint and limb channels of a stack."""
    started = time.perf_counter()
    spath = _require(_resolve(ctx, stack_path), "stack file")
    stack = load_stack(spath)
    skeletons = decode_stack(
        stack.channels[JOINT_CHANNELS],
        stack.channels[PAF_CHANNELS],
        peak_threshold=peak_threshold,
        limb_threshold=limb_threshold,
        samples=samples,
    )
    out = _resolve(ctx, out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {"skeletons": skeletons_to_json(skeletons)}
    atomic_write_bytes(out, json.dumps(payload, indent=2).encode())
    _write_manifest(Path(str(out) + ".manifest.json"), "decode-pose",
                    {"stack": spath}, started=started)
    click.echo(f"decoded {len(skeletons)} skeletons to {out}")


@main.command("decode-captions")
@click.option("--stack", "stack_path", required=True, type=click.Path())
@click.option("--embeddings", required=True, type=click.Path())
@click.option("--vocab", required=True, type=click.Path())
@click.option("--norm-threshold", default=0.01, show_default=True, type=float)
@click.option("--sim-threshold", default=0.5, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def decode_captions(ctx, stack_path, embeddings, vocab, norm_threshold, sim_threshold, out_path):
    """Turn the 8x300 token block of a stack back into words."""
    started = time.perf_counter()
    spath = _require(_resolve(ctx, stack_path), "stack file")
    table = cap.load_embeddings(_require(_resolve(ctx, embeddings), "embedding file"))
    vocab_obj = cap.load_vocab(_require(_resolve(ctx, vocab), "vocabulary file"))
    stack = load_stack(spath)
    words = cap.decode_tokens(stack.tokens, table, vocab_obj, norm_threshold, sim_threshold)
    out = _resolve(ctx, out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = [{"word": w, "cosine": c} for w, c in words]
    atomic_write_bytes(out, json.dumps(payload, indent=2).encode())
    _write_manifest(Path(str(out) + ".manifest.json"), "decode-captions",
                    {"stack": spath}, started=started)
    click.echo(f"decoded {len(words)} tokens to {out}")


_MODALITIES = (
    ("Joints", JOINT_CHANNELS, False),
    ("PAFs", PAF_CHANNELS, False),
    ("Depth", DEPTH_CHANNEL, False),
    ("Normals", NORMAL_CHANNELS, True),  # [-1,1] remapped to [0,1] for HDM
    ("Text Seg.", TEXT_CHANNEL, False),
    ("Class Seg.", GROUP_CHANNELS, False),
)


@main.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path())
@click.option("--truth", "truth_dir", required=True, type=click.Path())
@click.option("--metric", type=click.Choice(["hdm", "mse", "loss"]), default="hdm",
              show_default=True)
@click.option("--T", "threshold", default=0.1, show_default=True, type=float)
@click.option("--loss-config", "loss_config_path", type=click.Path(), default=None,
              help="JSON {weight, gains} for --metric loss.")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.pass_context
def eval_cmd(ctx, pred_dir, truth_dir, metric, threshold, loss_config_path, out_path):
    """Per-modality metric table over paired stack directories."""
    started = time.perf_counter()
    pdir = _require(_resolve(ctx, pred_dir), "prediction directory")
    tdir = _require(_resolve(ctx, truth_dir), "truth directory")
    names = sorted(
        p.name for p in pdir.glob("*.bin") if not p.name.endswith(".tokens.bin")
    )
    if not names:
        raise MissingInput(f"no stack files in {pdir}")
    loss_config = LossConfig()
    if loss_config_path:
        with open(_require(_resolve(ctx, loss_config_path), "loss config")) as fh:
            fields = json.load(fh)
        loss_config = LossConfig(
            weight=float(fields.get("weight", 1.0)),
            gains={**loss_config.gains, **fields.get("gains", {})},
        )
    if metric == "loss":
        rows = {"total": 0.0}
        for fname in names:
            _require(tdir / fname, "matching truth stack")
            total, per_term = multiterm_loss(
                load_stack(pdir / fname), load_stack(tdir / fname), loss_config
            )
            rows["total"] += total
            for term, value in per_term.items():
                rows[term] = rows.get(term, 0.0) + value
        rows = {k: v / len(names) for k, v in rows.items()}
    else:
        sums = {name: 0.0 for name, _, _ in _MODALITIES}
        for fname in names:
            _require(tdir / fname, "matching truth stack")
            ps = load_stack(pdir / fname)
            ts = load_stack(tdir / fname)
            for name, sel, remap in _MODALITIES:
                a = ps.channels[sel].astype(np.float64)
                b = ts.channels[sel].astype(np.float64)
                if remap:
                    a = (a + 1.0) / 2.0
                    b = (b + 1.0) / 2.0
                if metric == "hdm":
                    sums[name] += hdm_metric(a, b, threshold)
                else:
                    sums[name] += float(np.mean((a - b) ** 2))
        rows = {name: sums[name] / len(names) for name, _, _ in _MODALITIES}
    label = metric.upper() + (f" T={threshold}" if metric == "hdm" else "")
    header = f"{'Modality':<12} {label:>12}"
    click.echo(header)
    click.echo("-" * len(header))
    for name, value in rows.items():
        click.echo(f"{name:<12} {value:>12.4f}")
    if out_path:
        out = _resolve(ctx, out_path)
        atomic_write_bytes(out, json.dumps(rows, indent=2).encode())
    _write_manifest(pdir / "eval.manifest.json", "eval",
                    {"pred": pdir, "truth": tdir, "metric": metric, "T": threshold},
                    started=started)


@main.command("augment-preview")
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file overriding augmentation fields (probabilities, limits).")
@click.option("--count", default=4, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.pass_context
def augment_preview(ctx, image_path, out_dir, config_path, count, seed):
    """Letterbox an RGB image and write seeded augmented variants."""
    started = time.perf_counter()
    ipath = _require(_resolve(ctx, image_path), "image file")
    rgb = np.asarray(Image.open(ipath).convert("RGB")).astype(np.float32) / 255.0
    planar = np.ascontiguousarray(rgb.transpose(2, 0, 1))
    boxed, _ = letterbox(planar)
    out = _resolve(ctx, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fields = {}
    if config_path:
        with open(_require(_resolve(ctx, config_path), "augment config")) as fh:
            fields = json.load(fh)
    fields["rng_seed"] = seed
    config = AugmentConfig(**fields)
    for i in range(count):
        sample = AugmentSample(image=boxed)
        aug, record = augment(sample, config, rng=sample_rng(seed, i))
        img8 = (np.clip(aug.image, 0, 1) * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)
        Image.fromarray(img8).save(out / f"aug_{i:03d}.png")
        record["sample_index"] = i
        atomic_write_bytes(out / f"aug_{i:03d}.json", json.dumps(record, indent=2).encode())
    _write_manifest(out / "manifest.json", "augment-preview",
                    {"image": ipath, "count": count, "config": config_path},
                    seed=seed, started=started)
    click.echo(f"wrote {count} augmented samples to {out}")


@main.command("arch-check")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.pass_context
def arch_check(ctx, preset, config_path, json_path):
    """Build a graph, print its shape table, and validate the topology."""
    started = time.perf_counter()
    if preset is None and config_path is None:
        preset = "ymap-1-8-44"
    if config_path is not None:
        cfg = config_from_json(_require(_resolve(ctx, config_path), "graph config"))
    else:
        cfg = PRESETS[preset]
    graph = build_ymap_graph(cfg)
    report = infer_shapes(graph)
    click.echo(format_report(graph, report))
    pic = report.out_shapes[graph.pictorial_output]
    tok = report.out_shapes[graph.token_output]
    click.echo(f"pictorial output: {pic[0]}x{pic[1]}x{pic[2]}")
    click.echo(f"token output: {tok[0]}x{tok[1]}")
    violations = validate_topology(graph)
    if json_path:
        payload = report_to_json(graph, report)
        payload["violations"] = violations
        atomic_write_bytes(_resolve(ctx, json_path), json.dumps(payload, indent=2).encode())
        manifest_path = Path(str(_resolve(ctx, json_path)) + ".manifest.json")
    else:
        manifest_path = _resolve(ctx, "arch-check.manifest.json")
    _write_manifest(manifest_path, "arch-check",
                    {"preset": preset, "config": config_path}, started=started)
    if violations:
        for v in violations:
            click.echo(f"VIOLATION: {v}", err=True)
        sys.exit(1)
    click.echo("topology: OK (0 violations)")


if __name__ == "__main__":
    main()
