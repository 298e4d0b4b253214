"""CNN graph description, legality checking, first-layer reshaping, execution.

A network is a DAG over one reserved input ("input") whose nodes are
either accelerated convolution layers or host-executed reference ops
(concat, global_avg_pool, fully_connected, softmax).  Convolutions run
on the accelerator model with split-merge scheduling; host ops run in
exact integer or real arithmetic on the CPU side.

Network description file, line oriented ('#' starts a comment):

    network <name>
    input <H> <X> <C>
    input_frac <f>
    node <id> conv filter=3 stride=2 pad=0 co=64 relu=1 pool=3x3s2 \
        fo=4 fp=7 fb=7 params=<qfb path> inputs=<id>[,<id>...] [emit=1]
    node <id> concat inputs=a,b
    node <id> global_avg_pool inputs=a
    node <id> fully_connected units=1000 params=<qfb path> inputs=a
    node <id> softmax inputs=a

A convolution's input exponent is inherited from its producer, so the
quantization chain is consistent by construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import perf
from .config import AccelConfig, Calibration, DEFAULT_CALIBRATION
from .engine import (
    LayerSpec,
    PoolSpec,
    conv_exec,
    conv_out_dims,
    exec_with_split,
    mpool_exec,
    plan_split,
    pool_out_dims,
)
from .errors import (
    ConfigTooSmallError,
    LoadError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .quant import DfpScheme, dequantize
from .tensors import FTensor3, QFilterBank, QTensor3, load_bank

INPUT_ID = "input"

HOST_KINDS = ("concat", "global_avg_pool", "fully_connected", "softmax")


@dataclass(frozen=True)
class ConvNode:
    """An accelerated convolution layer with optional fused ReLU / max-pool."""

    id: str
    filter: int
    stride: int
    padding: int
    co: int
    relu: bool
    pool: PoolSpec | None
    out_frac: int
    weight_frac: int
    bias_frac: int
    params: str | None
    inputs: tuple[str, ...]
    emit: bool = False

    kind = "conv"


@dataclass(frozen=True)
class HostNode:
    """A node executed by the host CPU."""

    id: str
    kind: str
    inputs: tuple[str, ...]
    units: int = 0
    params: str | None = None
    emit: bool = False


@dataclass(frozen=True)
class ShapedNode:
    """A node with its resolved geometry and, for convolutions, its LayerSpec."""

    node_id: str
    kind: str
    in_geom: tuple[int, int, int]
    out_geom: tuple[int, int, int]
    spec: LayerSpec | None


class NetworkGraph:
    """Immutable layer DAG plus the graph input geometry and exponent."""

    def __init__(self, name, input_geom, input_frac, nodes, base_dir="."):
        self.name = name
        self.input_geom = tuple(input_geom)
        self.input_frac = input_frac
        self.nodes = tuple(nodes)
        self.base_dir = base_dir
        if min(self.input_geom) < 1:
            raise ValidationError(f"{name}: input geometry {self.input_geom} has a zero dim")
        self._by_id = {}
        for node in self.nodes:
            if node.id == INPUT_ID or node.id in self._by_id:
                raise ValidationError(f"{name}: duplicate or reserved node id {node.id!r}")
            self._by_id[node.id] = node
        self._order = self._toposort()
        self._shaped = self._infer_shapes()

    def _toposort(self):
        known = set(self._by_id)
        for node in self.nodes:
            if not node.inputs:
                raise ValidationError(f"{self.name}: node {node.id!r} has no inputs")
            for ref in node.inputs:
                if ref != INPUT_ID and ref not in known:
                    raise ValidationError(
                        f"{self.name}: node {node.id!r} references unknown input {ref!r}"
                    )
        if self.nodes and not any(INPUT_ID in n.inputs for n in self.nodes):
            raise ValidationError(f"{self.name}: no node consumes the graph input")
        pending = {n.id: sum(1 for r in n.inputs if r != INPUT_ID) for n in self.nodes}
        done = []
        ready = [n for n in self.nodes if pending[n.id] == 0]
        consumers = {}
        for node in self.nodes:
            for ref in node.inputs:
                if ref != INPUT_ID:
                    consumers.setdefault(ref, []).append(node.id)
        while ready:
            node = ready.pop(0)
            done.append(node)
            for cid in consumers.get(node.id, ()):
                pending[cid] -= 1
                if pending[cid] == 0:
                    ready.append(self._by_id[cid])
            ready.sort(key=lambda n: self.nodes.index(n))
        if len(done) != len(self.nodes):
            stuck = sorted(set(self._by_id) - {n.id for n in done})
            raise ValidationError(f"{self.name}: cycle involving {', '.join(stuck)}")
        return tuple(done)

    def _infer_shapes(self):
        # geometry and quantization exponent per producer; frac None = real domain
        geom = {INPUT_ID: self.input_geom}
        frac = {INPUT_ID: self.input_frac}
        shaped = []
        for node in self._order:
            in_geoms = [geom[r] for r in node.inputs]
            in_fracs = [frac[r] for r in node.inputs]
            if node.kind == "conv":
                if len(node.inputs) != 1:
                    raise ValidationError(f"{node.id}: conv takes exactly one input")
                if in_fracs[0] is None:
                    raise ValidationError(
                        f"{node.id}: conv input {node.inputs[0]!r} is real-valued"
                    )
                spec = LayerSpec(
                    node.filter,
                    node.stride,
                    node.padding,
                    node.co,
                    node.relu,
                    node.pool,
                    DfpScheme(in_fracs[0], node.weight_frac, node.bias_frac, node.out_frac),
                )
                h, x, _ = in_geoms[0]
                try:
                    ho, wo = conv_out_dims(h, x, spec)
                    if spec.pool:
                        ho, wo = pool_out_dims(ho, wo, spec.pool)
                except ShapeError as exc:
                    raise ValidationError(f"{node.id}: {exc}") from None
                out_geom, out_frac = (ho, wo, node.co), node.out_frac
            elif node.kind == "concat":
                if len(node.inputs) < 2:
                    raise ValidationError(f"{node.id}: concat needs at least two inputs")
                if any(f is None for f in in_fracs):
                    raise ValidationError(f"{node.id}: concat of real-valued inputs")
                if len({g[:2] for g in in_geoms}) != 1:
                    raise ValidationError(f"{node.id}: concat inputs differ spatially")
                if len(set(in_fracs)) != 1:
                    raise ValidationError(f"{node.id}: concat inputs differ in frac_bits")
                h, x, _ = in_geoms[0]
                out_geom = (h, x, sum(g[2] for g in in_geoms))
                out_frac, spec = in_fracs[0], None
            elif node.kind == "global_avg_pool":
                if len(node.inputs) != 1 or in_fracs[0] is None:
                    raise ValidationError(f"{node.id}: global_avg_pool takes one quantized input")
                out_geom, out_frac, spec = (1, 1, in_geoms[0][2]), in_fracs[0], None
            elif node.kind == "fully_connected":
                if len(node.inputs) != 1:
                    raise ValidationError(f"{node.id}: fully_connected takes one input")
                if node.units < 1:
                    raise ValidationError(f"{node.id}: fully_connected needs units >= 1")
                out_geom, out_frac, spec = (1, 1, node.units), None, None
            elif node.kind == "softmax":
                if len(node.inputs) != 1:
                    raise ValidationError(f"{node.id}: softmax takes one input")
                g = in_geoms[0]
                out_geom, out_frac, spec = (1, 1, g[0] * g[1] * g[2]), None, None
            else:
                raise ValidationError(f"{node.id}: unknown node kind {node.kind!r}")
            geom[node.id] = out_geom
            frac[node.id] = out_frac
            shaped.append(ShapedNode(node.id, node.kind, in_geoms[0], out_geom, spec))
        return tuple(shaped)

    def topo_order(self):
        return self._order

    def shaped_nodes(self):
        return self._shaped

    def shaped(self, node_id) -> ShapedNode:
        for sn in self._shaped:
            if sn.node_id == node_id:
                return sn
        raise KeyError(node_id)

    def terminal_ids(self):
        consumed = {r for n in self.nodes for r in n.inputs}
        return tuple(n.id for n in self.nodes if n.id not in consumed)

    def mac_count(self) -> int:
        """Multiply-accumulate count of the accelerated layers."""
        total = 0
        for sn in self._shaped:
            if sn.spec is not None:
                h, x, ci = sn.in_geom
                ho, wo = conv_out_dims(h, x, sn.spec)
                total += ho * wo * sn.spec.co * sn.spec.filter**2 * ci
        return total


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_POOLS = {"none": None, "2x2s2": PoolSpec(2), "3x3s2": PoolSpec(3)}


def _parse_kv(pairs, path, line_no):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ParseError(path, line_no, f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key] = value
    return out

def _take_int(kv, key, path, line_no):
    if key not in kv:
        raise ParseError(path, line_no, f"missing {key}")
    try:
        return int(kv.pop(key))
    except ValueError:
        raise ParseError(path, line_no, f"bad integer for {key}") from None


def _parse_node(parts, path, line_no):
    if len(parts) < 2:
        raise ParseError(path, line_no, "node needs an id and a kind")
    node_id, kind = parts[0], parts[1]
    kv = _parse_kv(parts[2:], path, line_no)
    if "inputs" not in kv:
        raise ParseError(path, line_no, f"node {node_id!r} missing inputs")
    inputs = tuple(s for s in kv.pop("inputs").split(",") if s)
    emit = kv.pop("emit", "0") not in ("0", "", "false")
    params = kv.pop("params", None)
    if kind == "conv":
        pool_key = kv.pop("pool", "none")
        if pool_key not in _POOLS:
            raise ParseError(path, line_no, f"unknown pool {pool_key!r}")
        node = ConvNode(
            id=node_id,
            filter=_take_int(kv, "filter", path, line_no),
            stride=_take_int(kv, "stride", path, line_no),
            padding=_take_int(kv, "pad", path, line_no),
            co=_take_int(kv, "co", path, line_no),
            relu=_take_int(kv, "relu", path, line_no) != 0,
            pool=_POOLS[pool_key],
            out_frac=_take_int(kv, "fo", path, line_no),
            weight_frac=_take_int(kv, "fp", path, line_no),
            bias_frac=_take_int(kv, "fb", path, line_no),
            params=params,
            inputs=inputs,
            emit=emit,
        )
    elif kind in HOST_KINDS:
        units = _take_int(kv, "units", path, line_no) if kind == "fully_connected" else 0
        node = HostNode(node_id, kind, inputs, units, params, emit)
    else:
        raise ParseError(path, line_no, f"unknown node kind {kind!r}")
    if kv:
        raise ParseError(path, line_no, f"unknown keys for {node_id!r}: {sorted(kv)}")
    return node


def parse_network(path) -> NetworkGraph:
    name = None
    input_geom = None
    input_frac = None
    nodes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            head = parts[0]
            if head == "network":
                if len(parts) != 2:
                    raise ParseError(path, line_no, "network takes one name")
                name = parts[1]
            elif head == "input":
                if len(parts) != 4:
                    raise ParseError(path, line_no, "input takes H X C")
                try:
                    input_geom = tuple(int(v) for v in parts[1:])
                except ValueError:
                    raise ParseError(path, line_no, "input dims must be integers") from None
            elif head == "input_frac":
                try:
                    input_frac = int(parts[1])
                except (IndexError, ValueError):
                    raise ParseError(path, line_no, "input_frac takes one integer") from None
            elif head == "node":
                nodes.append(_parse_node(parts[1:], path, line_no))
            else:
                raise ParseError(path, line_no, f"unknown directive {head!r}")
    if name is None or input_geom is None or input_frac is None:
        raise ParseError(path, 0, "network, input, and input_frac headers are required")
    try:
        return NetworkGraph(name, input_geom, input_frac, nodes, os.path.dirname(path) or ".")
    except (ValidationError, ValueError) as exc:
        raise ParseError(path, 0, str(exc)) from None


def save_network(net: NetworkGraph, path) -> None:
    lines = [f"network {net.name}", "input {} {} {}".format(*net.input_geom), f"input_frac {net.input_frac}"]
    pool_names = {None: "none", PoolSpec(2): "2x2s2", PoolSpec(3): "3x3s2"}
    for node in net.nodes:
        if node.kind == "conv":
            fields = (
                f"filter={node.filter} stride={node.stride} pad={node.padding} "
                f"co={node.co} relu={int(node.relu)} pool={pool_names[node.pool]} "
                f"fo={node.out_frac} fp={node.weight_frac} fb={node.bias_frac}"
            )
            if node.params:
                fields += f" params={node.params}"
        else:
            fields = f"units={node.units}" if node.kind == "fully_connected" else ""
            if node.params:
                fields += f" params={node.params}"
        inputs = ",".join(node.inputs)
        emit = " emit=1" if node.emit else ""
        entry = f"node {node.id} {node.kind} {fields} inputs={inputs}{emit}".replace("  ", " ")
        lines.append(entry)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Legality checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerVerdict:
    node_id: str
    verdict: str  # fits | split | unsupported
    groups: int
    detail: str


@dataclass(frozen=True)
class LegalityReport:
    rows: tuple[LayerVerdict, ...]

    @property
    def ok(self) -> bool:
        return all(r.verdict != "unsupported" for r in self.rows)

    def __str__(self):
        lines = []
        for r in self.rows:
            extra = f" ({r.detail})" if r.detail else ""
            lines.append(f"{r.node_id}: {r.verdict}{extra}")
        return "\n".join(lines)


def validate(net: NetworkGraph, cfg: AccelConfig) -> LegalityReport:
    """Per-layer verdict against the configuration's buffer budgets."""
    rows = []
    for sn in net.shaped_nodes():
        if sn.spec is None:
            continue
        spec, (h, x, ci) = sn.spec, sn.in_geom
        problems = []
        if spec.filter > cfg.filter_max:
            problems.append(f"filter {spec.filter} exceeds FILTER_MAX={cfg.filter_max}")
        row_bytes = (x + 2 * spec.padding) * ci
        if row_bytes > cfg.win_x_chin_pad_max:
            problems.append(
                f"input row of {row_bytes} bytes exceeds WINxCHIN_PAD_MAX={cfg.win_x_chin_pad_max}"
            )
        window_bytes = spec.filter * spec.filter * ci
        if window_bytes > cfg.filter_x_filter_x_chin_max:
            problems.append(
                f"window of {window_bytes} bytes exceeds "
                f"FILTERxFILTERxCHIN_MAX={cfg.filter_x_filter_x_chin_max}"
            )
        if spec.pool is not None:
            ho, wo = conv_out_dims(h, x, spec)
            pool_row = wo * spec.co
            if pool_row > cfg.pwin_x_pch_max:
                problems.append(
                    f"pool row of {pool_row} bytes exceeds PWINxPCH_MAX={cfg.pwin_x_pch_max}"
                )
            if spec.co > cfg.pch_max:
                problems.append(f"pool pixel of {spec.co} bytes exceeds PCH_MAX={cfg.pch_max}")
        groups = 0
        if not problems:
            try:
                groups = plan_split((spec.co, spec.filter, spec.filter, ci), cfg).restreams
            except ConfigTooSmallError as exc:
                problems.append(str(exc))
        if problems:
            rows.append(LayerVerdict(sn.node_id, "unsupported", 0, "; ".join(problems)))
        elif groups == 1:
            rows.append(LayerVerdict(sn.node_id, "fits", 1, ""))
        else:
            rows.append(LayerVerdict(sn.node_id, "split", groups, f"{groups} groups"))
    return LegalityReport(tuple(rows))


# ---------------------------------------------------------------------------
# First-layer reshaping
# ---------------------------------------------------------------------------

# Tap relocation tables: original filter row index -> (folded kernel row,
# fold sub-row).  Column mapping is identical by symmetry.
_TAP_MAPS = {
    (1, 0): {0: (0, 0)},
    (3, 1): {0: (0, 1), 1: (1, 0), 2: (1, 1)},
    (3, 0): {0: (1, 0), 1: (1, 1), 2: (2, 0)},
}


@dataclass(frozen=True)
class ReshapeTransform:
    """Equivalence-preserving fold of a small-channel stride-2 layer.

    Spatial 2x2 blocks of the input fold into the channel dimension
    (channel c of sub-position (dy, dx) lands at (dy*2+dx)*ci + c), the
    filter taps relocate per ``tap_map``, and for pad-0 layers the folded
    output carries extra border rows that are cropped away.  Execution of
    the folded layer is bit-exact equal to the original.
    """

    original_spec: LayerSpec
    original_geom: tuple[int, int, int]
    reshaped_spec: LayerSpec
    reshaped_geom: tuple[int, int, int]
    fold: int
    tap_map: dict
    crop: tuple[int, int]
    fold_kernel: int

    def map_activation(self, fy, fx, fc):
        """Folded coordinate -> original (y, x, c), or None for fold padding."""
        h, x, ci = self.original_geom
        block, c = divmod(fc, ci)
        dy, dx = divmod(block, self.fold)
        y, xx = self.fold * fy + dy, self.fold * fx + dx
        if y >= h or xx >= x:
            return None
        return (y, xx, c)

    def fold_input(self, t: QTensor3) -> QTensor3:
        if t.geom != self.original_geom:
            raise ShapeError(f"expected input {self.original_geom}, got {t.geom}")
        h, x, ci = t.geom
        fh, fx, fc = self.reshaped_geom
        src = t.as_3d()
        out = np.zeros((fh, fx, fc), dtype=np.int8)
        for dy in range(self.fold):
            for dx in range(self.fold):
                rows = (h - dy + self.fold - 1) // self.fold
                cols = (x - dx + self.fold - 1) // self.fold
                block = (dy * self.fold + dx) * ci
                out[:rows, :cols, block : block + ci] = src[dy :: self.fold, dx :: self.fold]
        return QTensor3(fh, fx, fc, out.reshape(-1), t.frac_bits)

    def fold_bank(self, bank: QFilterBank) -> QFilterBank:
        if bank.geom != (
            self.original_spec.co,
            self.original_spec.filter,
            self.original_spec.filter,
            self.original_geom[2],
        ):
            raise ShapeError(f"bank {bank.geom} does not match the original layer")
        ci = bank.ci
        k = self.reshaped_spec.filter
        out = np.zeros((bank.co, k, k, self.reshaped_geom[2]), dtype=np.int8)
        w4 = bank.as_4d()
        for fy, (gy, dy) in self.tap_map.items():
            for fx, (gx, dx) in self.tap_map.items():
                block = (dy * self.fold + dx) * ci
                out[:, gy, gx, block : block + ci] = w4[:, fy, fx, :]
        return QFilterBank(
            bank.co,
            k,
            k,
            self.reshaped_geom[2],
            out.reshape(-1),
            bank.biases,
            bank.weight_frac_bits,
            bank.bias_frac_bits,
        )

    def run(self, ia: QTensor3, bank: QFilterBank) -> QTensor3:
        """Execute the folded layer; bit-exact equal to accel_exec on the original."""
        folded = self.fold_input(ia)
        folded_bank = self.fold_bank(bank)
        conv_spec = LayerSpec(
            self.reshaped_spec.filter,
            self.reshaped_spec.stride,
            self.reshaped_spec.padding,
            self.reshaped_spec.co,
            self.reshaped_spec.relu,
            None,
            self.reshaped_spec.scheme,
        )
        out = conv_exec(folded, folded_bank, conv_spec)
        ho, wo = self.crop
        if (out.height, out.width) != (ho, wo):
            cropped = out.as_3d()[:ho, :wo]
            out = QTensor3(ho, wo, out.channels, cropped.reshape(-1), out.frac_bits)
        if self.original_spec.pool is not None:
            out = mpool_exec(out, self.original_spec.pool.window)
        return out

    def mac_count_original(self) -> int:
        """Multiplies touching real (non-padding) input positions."""
        spec, (h, x, ci) = self.original_spec, self.original_geom
        ho, wo = conv_out_dims(h, x, spec)
        taps = 0
        for yo in range(ho):
            for xo in range(wo):
                for fy in range(spec.filter):
                    if not 0 <= spec.stride * yo + fy - spec.padding < h:
                        continue
                    for fx in range(spec.filter):
                        if 0 <= spec.stride * xo + fx - spec.padding < x:
                            taps += 1
        return taps * ci * spec.co

    def mac_count_reshaped(self) -> int:
        """Multiplies of the folded layer hitting real data via the index maps."""
        spec = self.reshaped_spec
        fh, fx, _ = self.reshaped_geom
        h, x, ci = self.original_geom
        ho, wo = self.crop
        pad = spec.padding
        taps = 0
        for yo in range(ho):
            for xo in range(wo):
                for _, (gy, dy) in self.tap_map.items():
                    fy = yo - pad + gy
                    if not 0 <= fy < fh or self.fold * fy + dy >= h:
                        continue
                    for _, (gx, dx) in self.tap_map.items():
                        fxx = xo - pad + gx
                        if 0 <= fxx < fx and self.fold * fxx + dx < x:
                            taps += 1
        return taps * ci * spec.co


def default_reshape_trigger(spec: LayerSpec, in_geom, icp: int) -> bool:
    """Reshape layers whose input channels underfill the multiplier array."""
    return spec.stride >= 2 and in_geom[2] < icp / 2


def reshape_first_layer(
    spec: LayerSpec, in_geom: tuple[int, int, int], icp: int, trigger=None
) -> ReshapeTransform | None:
    """Build the fold transform for a first layer, or None when not applicable.

    Folding turns a stride-2 kxk layer over (H, X, C) into a stride-1
    layer over (ceil(H/2), ceil(X/2), 4C) whose kernel spans ceil(k/2)
    folded cells; MAC count over real positions is conserved.
    """
    trigger = trigger or default_reshape_trigger
    if not trigger(spec, in_geom, icp):
        return None
    h, x, ci = in_geom
    conv_out_dims(h, x, spec)  # geometry sanity before transforming
    fold = spec.stride
    if fold == 1:
        # Degenerate fold: the transform is the identity.
        tap_map = {i: (i, 0) for i in range(spec.filter)}
        return ReshapeTransform(
            spec, in_geom, spec, in_geom, 1, tap_map, conv_out_dims(h, x, spec), spec.filter
        )
    tap_map = _TAP_MAPS[(spec.filter, spec.padding)]
    folded_geom = ((h + 1) // 2, (x + 1) // 2, ci * fold * fold)
    if spec.filter == 1:
        new_filter, new_pad = 1, 0
    else:
        new_filter, new_pad = 3, 1
    reshaped = LayerSpec(new_filter, 1, new_pad, spec.co, spec.relu, spec.pool, spec.scheme)
    crop = conv_out_dims(h, x, spec)
    gs = [g for g, _ in tap_map.values()]
    return ReshapeTransform(
        spec, in_geom, reshaped, folded_geom, fold, tap_map, crop, max(gs) - min(gs) + 1
    )


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _round_half_away_int(total: int, n: int) -> int:
    mag = (2 * abs(total) + n) // (2 * n)
    return mag if total >= 0 else -mag


def _load_conv_bank(node: ConvNode, base_dir, in_ci: int) -> QFilterBank:
    if not node.params:
        raise LoadError(f"{node.id}: no parameter file declared")
    path = os.path.join(base_dir, node.params)
    if not os.path.exists(path):
        raise LoadError(f"{node.id}: parameter file {path} not found")
    bank = load_bank(path)
    if bank.geom != (node.co, node.filter, node.filter, in_ci):
        raise LoadError(
            f"{node.id}: bank {bank.geom} does not match layer "
            f"({node.co}, {node.filter}, {node.filter}, {in_ci})"
        )
    if bank.weight_frac_bits != node.weight_frac or bank.bias_frac_bits != node.bias_frac:
        raise LoadError(
            f"{node.id}: bank exponents ({bank.weight_frac_bits}, {bank.bias_frac_bits}) "
            f"disagree with declared (fp={node.weight_frac}, fb={node.bias_frac})"
        )
    return bank


def run_network(
    net: NetworkGraph,
    cfg: AccelConfig,
    input_tensor: QTensor3,
    *,
    params_root: str | None = None,
    calib: Calibration = DEFAULT_CALIBRATION,
    emits: tuple[str, ...] = (),
):
    """Execute a network; returns ({node_id: tensor}, PerfReport).

    Accelerated nodes run through split-merge scheduling; host ops run in
    reference arithmetic.  Returned tensors cover emit-flagged nodes,
    explicitly requested ids, and all terminal nodes.
    """
    legality = validate(net, cfg)
    if not legality.ok:
        raise ValidationError(f"{net.name} is not legal under {cfg.name or 'config'}:\n{legality}")
    if input_tensor.geom != net.input_geom:
        raise ValidationError(
            f"input tensor {input_tensor.geom} does not match graph input {net.input_geom}"
        )
    if input_tensor.frac_bits != net.input_frac:
        raise ValidationError(
            f"input frac_bits {input_tensor.frac_bits} != declared {net.input_frac}"
        )
    for want in emits:
        if want != INPUT_ID and want not in net._by_id:
            raise ValidationError(f"requested output {want!r} is not a node id")

    base_dir = params_root if params_root is not None else net.base_dir
    report = perf.network_perf(net, cfg, calib)
    results = {INPUT_ID: input_tensor}
    for node, sn in zip(net.topo_order(), net.shaped_nodes()):
        sources = [results[r] for r in node.inputs]
        if node.kind == "conv":
            bank = _load_conv_bank(node, base_dir, sn.in_geom[2])
            out = exec_with_split(sources[0], bank, sn.spec, cfg)
        elif node.kind == "concat":
            merged = np.concatenate([s.as_3d() for s in sources], axis=2)
            h, x, c = merged.shape
            out = QTensor3(h, x, c, merged.reshape(-1), sources[0].frac_bits)
        elif node.kind == "global_avg_pool":
            src = sources[0]
            sums = src.as_3d().astype(np.int64).sum(axis=(0, 1))
            n = src.height * src.width
            vals = [_round_half_away_int(int(s), n) for s in sums]
            out = QTensor3(1, 1, src.channels, vals, src.frac_bits)
        elif node.kind == "fully_connected":
            src = sources[0]
            flat = (
                dequantize(src).values if isinstance(src, QTensor3) else src.values
            )
            if not node.params:
                raise LoadError(f"{node.id}: no parameter file declared")
            path = os.path.join(base_dir, node.params)
            if not os.path.exists(path):
                raise LoadError(f"{node.id}: parameter file {path} not found")
            bank = load_bank(path)
            if bank.co != node.units or bank.ci != flat.size or (bank.fh, bank.fw) != (1, 1):
                raise LoadError(
                    f"{node.id}: bank {bank.geom} does not match fully_connected "
                    f"({node.units} units on {flat.size} inputs)"
                )
            w = bank.as_4d().reshape(node.units, flat.size) * 2.0**-bank.weight_frac_bits
            b = bank.biases.astype(np.float64) * 2.0**-bank.bias_frac_bits
            out = FTensor3(1, 1, node.units, w @ flat + b)
        elif node.kind == "softmax":
            src = sources[0]
            flat = dequantize(src).values if isinstance(src, QTensor3) else src.values
            e = np.exp(flat - flat.max())
            out = FTensor3(1, 1, flat.size, e / e.sum())
        else:  # pragma: no cover - parse rejects unknown kinds
            raise ValidationError(f"{node.id}: unknown node kind {node.kind!r}")
        results[node.id] = out

    wanted = set(emits) | set(net.terminal_ids())
    wanted.update(n.id for n in net.nodes if n.emit)
    return {node_id: results[node_id] for node_id in sorted(wanted)}, report
