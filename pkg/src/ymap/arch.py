"""Declarative model of the Y-shaped network topology: build the layer
graph from a configuration, infer every tensor shape, count parameters, and
check the structural rules (single encoder, 3-dense bridge, two output
branches, per-level skip joins, tanh outputs, scaled token residuals).

Shape convention: (height, width, channels) for spatial tensors, (n,) for
vectors, (slots, dims) for the stacked token output. conv3x3 preserves
spatial dims, avgpool halves (floor), upsample doubles, dense flattens its
input; a dense may declare `reshape_to` so the decoder can consume its
output spatially.
"""

import json
import math
from dataclasses import dataclass, field, replace

KINDS = (
    "conv3x3",
    "conv1x1",
    "avgpool",
    "upsample",
    "dense",
    "add",
    "concat",
    "dropout",
    "activation",
)
ACTIVATIONS = ("tanh", "leaky_relu")


class ShapeError(ValueError):
    """Raised when shape propagation fails; names the offending edge."""


@dataclass
class LayerSpec:
    kind: str
    filters: int = 0  # conv / dense output width
    rate: float = 0.0  # dropout
    activation: str = ""  # activation layers only
    reshape_to: tuple | None = None  # dense only
    stack: bool = False  # concat: stack equal vectors on a new axis


@dataclass
class GraphSpec:
    layers: dict = field(default_factory=dict)  # name -> LayerSpec
    edges: list = field(default_factory=list)  # (src, dst, scale)
    input_node: str = "input"
    input_shape: tuple = (256, 256, 3)
    pictorial_output: str | None = None
    token_output: str | None = None
    multihot_output: str | None = None
    meta: dict = field(default_factory=dict)

    def add_layer(self, name, spec, *inputs):
        if name in self.layers:
            raise ValueError(f"duplicate layer name {name}")
        self.layers[name] = spec
        for src in inputs:
            self.edges.append((src, name, 1.0))
        return name

    def in_edges(self, name):
        return [e for e in self.edges if e[1] == name]


@dataclass(frozen=True)
class ArchConfig:
    depth: int = 7
    widths: tuple | None = None  # per-level encoder filters; mirrored by the decoder
    input_size: int = 256
    in_channels: int = 3
    out_channels: int = 44
    pixelwise_width: int = 1500
    bridge_width: int = 512
    token_slots: int = 8
    token_dims: int = 300
    token_dropout_start: float = 0.20
    token_residual_scale: float = 0.3
    block_residuals: bool = True
    multihot_tail: bool = False
    multihot_classes: int = 2048
    tail_hidden: int = 512

    def resolved_widths(self):
        if self.widths is not None:
            if len(self.widths) != self.depth:
                raise ValueError(f"need {self.depth} widths, got {len(self.widths)}")
            return tuple(self.widths)
        return tuple(min(32 * 2 ** k, 512) for k in range(self.depth))


PRESETS = {
    "ymap-1-8-44": ArchConfig(),
    "ymap-1-8-44-multihot": ArchConfig(multihot_tail=True),
    "ymap-shallow-4-128": ArchConfig(depth=4, input_size=128),
    "ymap-mid-5-256": ArchConfig(depth=5),
    "ymap-pose-depth-21": ArchConfig(depth=5, out_channels=21),
}


def build_ymap_graph(config=ArchConfig()):
    """Assemble the Y-shaped graph for a configuration.

    The default configuration is the 1-8-44 flavor: one RGB input, eight
    300-dim token outputs, and a 44-channel 256x256 pictorial output behind
    a 1x1x1500 pixelwise layer.
    """
    if config.depth < 1:
        raise ValueError("depth must be >= 1")
    if config.input_size % (2 ** config.depth) != 0:
        raise ValueError(
            f"input size {config.input_size} not divisible by 2^{config.depth}"
        )
    widths = config.resolved_widths()
    if any(w <= 0 for w in widths):
        raise ValueError("widths must be positive")
    if config.pixelwise_width <= 0:
        raise ValueError("pixelwise width must be positive")

    g = GraphSpec(input_shape=(config.input_size, config.input_size, config.in_channels))
    roles = {}
    enc_skip_sources = []

    prev = g.input_node
    for k in range(1, config.depth + 1):
        w = widths[k - 1]
        c1 = g.add_layer(f"enc{k}_conv1", LayerSpec("conv3x3", filters=w), prev)
        a1 = g.add_layer(f"enc{k}_act1", LayerSpec("activation", activation="leaky_relu"), c1)
        c2 = g.add_layer(f"enc{k}_conv2", LayerSpec("conv3x3", filters=w), a1)
        a2 = g.add_layer(f"enc{k}_act2", LayerSpec("activation", activation="leaky_relu"), c2)
        if config.block_residuals:
            out = g.add_layer(f"enc{k}_add", LayerSpec("add"), a1, a2)
        else:
            out = a2
        pool = g.add_layer(f"enc{k}_pool", LayerSpec("avgpool"), out)
        enc_skip_sources.append(out)
        for n in (c1, a1, c2, a2, pool, out):
            roles[n] = "encoder"
        prev = pool

    bs = config.input_size // (2 ** config.depth)
    bridge_ch = widths[-1]
    d1 = g.add_layer("bridge_dense1", LayerSpec("dense", filters=config.bridge_width), prev)
    b1 = g.add_layer("bridge_act1", LayerSpec("activation", activation="leaky_relu"), d1)
    d2 = g.add_layer("bridge_dense2", LayerSpec("dense", filters=config.bridge_width), b1)
    b2 = g.add_layer("bridge_act2", LayerSpec("activation", activation="leaky_relu"), d2)
    d3 = g.add_layer(
        "bridge_dense3",
        LayerSpec("dense", filters=bs * bs * bridge_ch, reshape_to=(bs, bs, bridge_ch)),
        b2,
    )
    b3 = g.add_layer("bridge_act3", LayerSpec("activation", activation="leaky_relu"), d3)
    for n in (d1, b1, d2, b2, d3, b3):
        roles[n] = "bridge"

    skip_edges = []
    prev = b3
    for j in range(1, config.depth + 1):
        w = widths[config.depth - j]
        up = g.add_layer(f"dec{j}_up", LayerSpec("upsample"), prev)
        c1 = g.add_layer(f"dec{j}_conv1", LayerSpec("conv3x3", filters=w), up)
        a1 = g.add_layer(f"dec{j}_act1", LayerSpec("activation", activation="leaky_relu"), c1)
        c2 = g.add_layer(f"dec{j}_conv2", LayerSpec("conv3x3", filters=w), a1)
        a2 = g.add_layer(f"dec{j}_act2", LayerSpec("activation", activation="leaky_relu"), c2)
        if config.block_residuals:
            inner = g.add_layer(f"dec{j}_add", LayerSpec("add"), a1, a2)
        else:
            inner = a2
        enc_src = enc_skip_sources[config.depth - j]
        join = g.add_layer(f"dec{j}_skip", LayerSpec("add"), inner, enc_src)
        skip_edges.append((enc_src, join))
        for n in (up, c1, a1, c2, a2, inner, join):
            roles[n] = "decoder"
        prev = join

    px = g.add_layer("pixelwise", LayerSpec("conv1x1", filters=config.pixelwise_width), prev)
    pxa = g.add_layer("pixelwise_act", LayerSpec("activation", activation="leaky_relu"), px)
    head = g.add_layer("pictorial_conv", LayerSpec("conv1x1", filters=config.out_channels), pxa)
    pout = g.add_layer("pictorial_out", LayerSpec("activation", activation="tanh"), head)
    for n in (px, pxa, head, pout):
        roles[n] = "decoder"
    g.pictorial_output = pout

    rates = [
        config.token_dropout_start * (config.token_slots - i) / config.token_slots
        for i in range(config.token_slots)
    ]
    token_outs = []
    token_dropouts = []
    token_residual_edges = []
    prev_tok_out = None
    prev_feed = b3
    for t in range(1, config.token_slots + 1):
        dense = g.add_layer(f"tok{t}_dense", LayerSpec("dense", filters=config.token_dims), prev_feed)
        pre = dense
        if prev_tok_out is not None:
            res = g.add_layer(f"tok{t}_res", LayerSpec("add"), dense)
            g.edges.append((prev_tok_out, res, config.token_residual_scale))
            token_residual_edges.append((prev_tok_out, res))
            pre = res
        out = g.add_layer(f"tok{t}_out", LayerSpec("activation", activation="tanh"), pre)
        drop = g.add_layer(f"tok{t}_drop", LayerSpec("dropout", rate=rates[t - 1]), out)
        for n in (dense, pre, out, drop):
            roles[n] = "token"
        token_outs.append(out)
        token_dropouts.append(drop)
        prev_tok_out = out
        prev_feed = drop
    tcat = g.add_layer("token_out", LayerSpec("concat", stack=True), *token_outs)
    roles[tcat] = "token"
    g.token_output = tcat

    if config.multihot_tail:
        t1 = g.add_layer("tail_dense1", LayerSpec("dense", filters=config.tail_hidden), tcat)
        ta1 = g.add_layer("tail_act1", LayerSpec("activation", activation="leaky_relu"), t1)
        t2 = g.add_layer("tail_dense2", LayerSpec("dense", filters=config.multihot_classes), ta1)
        tout = g.add_layer("tail_out", LayerSpec("activation", activation="tanh"), t2)
        for n in (t1, ta1, t2, tout):
            roles[n] = "tail"
        g.multihot_output = tout

    g.meta = {
        "roles": roles,
        "encoder_blocks": [f"enc{k}" for k in range(1, config.depth + 1)],
        "enc_skip_sources": enc_skip_sources,
        "skip_edges": skip_edges,
        "bridge": ["bridge_dense1", "bridge_dense2", "bridge_dense3"],
        "bridge_spatial": bs,
        "pixelwise": "pixelwise",
        "pictorial_head": "pictorial_conv",
        "output_activations": [pout] + token_outs + (["tail_out"] if config.multihot_tail else []),
        "token_dropouts": token_dropouts,
        "token_residual_edges": token_residual_edges,
        "token_residual_scale": config.token_residual_scale,
    }
    return g


@dataclass
class ShapeReport:
    in_shapes: dict  # name -> list of input shapes
    out_shapes: dict  # name -> output shape
    params: dict  # name -> parameter count
    total_params: int
    branch_params: dict  # role -> parameter count


def _topo_order(graph):
    consumers = {}
    for src, dst, _ in graph.edges:
        if dst not in graph.layers:
            raise ShapeError(f"edge {src}->{dst}: destination is not a declared layer")
        if src != graph.input_node and src not in graph.layers:
            raise ShapeError(f"edge {src}->{dst}: source is not a declared layer")
        consumers.setdefault(src, []).append(dst)
    remaining = {
        name: sum(1 for s, d, _ in graph.edges if d == name and s != graph.input_node)
        for name in graph.layers
    }
    # Kahn's algorithm, stable in insertion order
    done = set()
    result = []
    frontier = [n for n in graph.layers if remaining[n] == 0]
    while frontier:
        n = frontier.pop(0)
        if n in done:
            continue
        done.add(n)
        result.append(n)
        for dst in consumers.get(n, []):
            remaining[dst] -= 1
            if remaining[dst] == 0:
                frontier.append(dst)
    if len(result) != len(graph.layers):
        missing = sorted(set(graph.layers) - done)
        raise ShapeError(f"graph is cyclic or disconnected at layers {missing}")
    return result


def infer_shapes(graph):
    """Forward shape propagation over the whole graph."""
    shapes = {graph.input_node: tuple(graph.input_shape)}
    in_shapes = {}
    for name in _topo_order(graph):
        spec = graph.layers[name]
        edges = graph.in_edges(name)
        srcs = [e[0] for e in edges]
        ins = []
        for s in srcs:
            if s not in shapes:
                raise ShapeError(f"edge {s}->{name}: source shape unknown")
            ins.append(shapes[s])
        in_shapes[name] = ins
        shapes[name] = _propagate(spec, ins, name, srcs)
    report = ShapeReport(in_shapes, {n: shapes[n] for n in graph.layers}, {}, 0, {})
    _count_into(graph, report)
    return report


def _propagate(spec, ins, name, srcs):
    kind = spec.kind
    if kind not in KINDS:
        raise ShapeError(f"{name}: unknown layer kind {kind!r}")
    if kind in ("conv3x3", "conv1x1", "avgpool", "upsample", "dense", "dropout", "activation"):
        if len(ins) != 1:
            raise ShapeError(f"{name}: {kind} expects exactly one input, got {len(ins)}")
    if kind in ("conv3x3", "conv1x1"):
        if len(ins[0]) != 3:
            raise ShapeError(f"edge {srcs[0]}->{name}: conv needs a (h, w, c) input, got {ins[0]}")
        h, w, _ = ins[0]
        return (h, w, spec.filters)
    if kind == "avgpool":
        h, w, c = ins[0]
        if h < 2 or w < 2:
            raise ShapeError(f"edge {srcs[0]}->{name}: cannot pool {ins[0]}")
        return (h // 2, w // 2, c)
    if kind == "upsample":
        h, w, c = ins[0]
        return (2 * h, 2 * w, c)
    if kind == "dense":
        n_out = spec.filters
        if spec.reshape_to is not None:
            if math.prod(spec.reshape_to) != n_out:
                raise ShapeError(f"{name}: reshape_to {spec.reshape_to} != {n_out} units")
            return tuple(spec.reshape_to)
        return (n_out,)
    if kind == "add":
        if len(ins) < 2:
            raise ShapeError(f"{name}: add expects at least two inputs")
        first = ins[0]
        for s, shp in zip(srcs[1:], ins[1:]):
            if shp != first:
                raise ShapeError(f"edge {s}->{name}: add shape mismatch {shp} vs {first}")
        return first
    if kind == "concat":
        if not ins:
            raise ShapeError(f"{name}: concat expects at least one input")
        first = ins[0]
        for s, shp in zip(srcs[1:], ins[1:]):
            if shp != first:
                raise ShapeError(f"edge {s}->{name}: concat shape mismatch {shp} vs {first}")
        if spec.stack:
            if len(first) != 1:
                raise ShapeError(f"{name}: stacking concat expects vector inputs, got {first}")
            return (len(ins), first[0])
        return first[:-1] + (sum(shp[-1] for shp in ins),)
    # dropout / activation
    return ins[0]


def _count_into(graph, report):
    total = 0
    branch = {}
    roles = graph.meta.get("roles", {})
    for name, spec in graph.layers.items():
        ins = report.in_shapes[name]
        if spec.kind == "conv3x3":
            p = (9 * ins[0][2] + 1) * spec.filters
        elif spec.kind == "conv1x1":
            p = (ins[0][2] + 1) * spec.filters
        elif spec.kind == "dense":
            p = (math.prod(ins[0]) + 1) * spec.filters
        else:
            p = 0
        report.params[name] = p
        total += p
        role = roles.get(name, "other")
        branch[role] = branch.get(role, 0) + p
    report.total_params = total
    report.branch_params = branch


def count_parameters(graph):
    """(total, per-layer dict); conv kxk costs (k*k*c_in + 1)*c_out, dense
    (n_in + 1)*n_out, everything else zero."""
    report = infer_shapes(graph)
    return report.total_params, report.params


def validate_topology(graph):
    """Check every structural rule; returns a list of violation strings
    (empty means valid). Violations are data, not exceptions."""
    violations = []
    meta = graph.meta

    for name, spec in graph.layers.items():
        if spec.kind not in KINDS:
            violations.append(f"layer kind: {name} has unknown kind {spec.kind!r}")
        if spec.kind == "activation" and spec.activation not in ACTIVATIONS:
            violations.append(
                f"activation rule: {name} uses {spec.activation!r}, allowed: {ACTIVATIONS}"
            )
        if spec.kind == "dropout" and not (0.0 <= spec.rate < 1.0):
            violations.append(f"dropout rate: {name} rate {spec.rate} outside [0, 1)")

    bridge = meta.get("bridge", [])
    if len(bridge) != 3 or any(
        graph.layers.get(n) is None or graph.layers[n].kind != "dense" for n in bridge
    ):
        violations.append("bridge rule: expected exactly 3 dense bridge layers")
    if graph.pictorial_output is None or graph.token_output is None:
        violations.append("y-shape rule: both pictorial and token outputs must exist")

    try:
        report = infer_shapes(graph)
    except ShapeError as exc:
        violations.append(f"shape rule: {exc}")
        report = None

    edge_set = {(s, d) for s, d, _ in graph.edges}
    for enc_src, join in meta.get("skip_edges", []):
        if (enc_src, join) not in edge_set:
            violations.append(f"skip rule: encoder block output {enc_src} has no skip edge")
        elif report is not None:
            a = report.out_shapes.get(enc_src)
            b = report.out_shapes.get(join)
            if a is not None and b is not None and a[:2] != b[:2]:
                violations.append(
                    f"skip rule: {enc_src}->{join} joins spatial {a[:2]} with {b[:2]}"
                )

    outputs = set(meta.get("output_activations", []))
    for name in outputs:
        spec = graph.layers.get(name)
        if spec is None or spec.kind != "activation" or spec.activation != "tanh":
            violations.append(f"output activation rule: {name} must be tanh")
    for name, spec in graph.layers.items():
        if spec.kind == "activation" and name not in outputs:
            if spec.activation != "leaky_relu":
                violations.append(
                    f"hidden activation rule: {name} must be leaky_relu, got {spec.activation!r}"
                )

    dropouts = meta.get("token_dropouts", [])
    rates = [graph.layers[n].rate for n in dropouts if n in graph.layers]
    if rates:
        if abs(rates[0] - 0.20) > 1e-12:
            violations.append(f"token dropout rule: first stage rate {rates[0]} != 0.20")
        if any(b > a for a, b in zip(rates, rates[1:])):
            violations.append("token dropout rule: rates must be non-increasing")

    scale = meta.get("token_residual_scale", 0.3)
    edge_scale = {(s, d): sc for s, d, sc in graph.edges}
    for s, d in meta.get("token_residual_edges", []):
        sc = edge_scale.get((s, d))
        if sc is None:
            violations.append(f"token residual rule: missing edge {s}->{d}")
        elif abs(sc - scale) > 1e-12:
            violations.append(f"token residual rule: edge {s}->{d} scale {sc} != {scale}")

    px = meta.get("pixelwise")
    head = meta.get("pictorial_head")
    if px and head:
        spec = graph.layers.get(px)
        if spec is None or spec.kind != "conv1x1":
            violations.append("pixelwise rule: pictorial head must be preceded by a conv1x1")
        else:
            feeds = {s for s, d, _ in graph.edges if d == head}
            reachable = any(_feeds_through_activation(graph, px, head))
            if not reachable:
                violations.append(f"pixelwise rule: {px} does not feed the pictorial head {head}")
    return violations


def _feeds_through_activation(graph, src, dst):
    # src feeds dst directly or through single activation/dropout layers
    frontier = [src]
    seen = set()
    while frontier:
        n = frontier.pop()
        if n in seen:
            continue
        seen.add(n)
        for s, d, _ in graph.edges:
            if s != n:
                continue
            if d == dst:
                yield True
                return
            spec = graph.layers.get(d)
            if spec is not None and spec.kind in ("activation", "dropout"):
                frontier.append(d)


def format_report(graph, report):
    """Human-readable shape/parameter table."""
    lines = []
    lines.append(f"{'layer':<18} {'kind':<11} {'output shape':<16} {'params':>12}")
    lines.append("-" * 60)
    lines.append(f"{graph.input_node:<18} {'input':<11} {str(graph.input_shape):<16} {0:>12}")
    for name in report.out_shapes:
        spec = graph.layers[name]
        lines.append(
            f"{name:<18} {spec.kind:<11} {str(report.out_shapes[name]):<16} "
            f"{report.params[name]:>12,}"
        )
    lines.append("-" * 60)
    for role, p in sorted(report.branch_params.items()):
        lines.append(f"{role + ' branch':<30} {p:>12,}")
    lines.append(f"{'total parameters':<30} {report.total_params:>12,}")
    return "\n".join(lines)


def report_to_json(graph, report):
    return {
        "input_shape": list(graph.input_shape),
        "layers": [
            {
                "name": name,
                "kind": graph.layers[name].kind,
                "output_shape": list(report.out_shapes[name]),
                "params": report.params[name],
            }
            for name in report.out_shapes
        ],
        "branch_params": report.branch_params,
        "total_params": report.total_params,
        "pictorial_output": graph.pictorial_output,
        "token_output": graph.token_output,
    }


def config_from_json(path_or_dict):
    """Load an ArchConfig from a JSON file or dict."""
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        with open(path_or_dict) as fh:
            data = json.load(fh)
    if "widths" in data and data["widths"] is not None:
        data["widths"] = tuple(data["widths"])
    return replace(ArchConfig(), **data)
