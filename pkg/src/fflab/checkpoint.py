"""Versioned binary checkpoints.

Layout (all integers little-endian):

    magic           4 bytes, b"FFN1" or b"BPN1"
    layer_count     u32
    per layer:
        in_width    u32
        out_width   u32
        act_tag     u8      (255 = linear, only the BPN1 output layer)
        W           out*in float64, row-major
        b           out float64
    optional trailing head section:
        tag             b"HEAD"
        num_classes     u32
        concat_width    u32
        n_included      u32
        included        n_included u32
        W               num_classes*concat_width float64
        b               num_classes float64

Round-trips are bit-exact. Optimizer state is not persisted; loaded
networks get fresh Adam moments.
"""

import struct

import numpy as np

from .activations import ACTIVATIONS, activation_by_tag
from .bp_baseline import BPNetwork, DenseLayer
from .errors import FormatError, UsageError
from .ffnet import FFLayer, FFNetwork
from .inference import ClassifierHead
from .numerics import AdamState

FF_MAGIC = b"FFN1"
BP_MAGIC = b"BPN1"
HEAD_TAG = b"HEAD"
LINEAR_TAG = 255


def _canonical_tag(act):
    if act.name not in ACTIVATIONS:
        raise UsageError(
            f"checkpoints carry only the canonical activation kinds; "
            f"got {act.name!r}"
        )
    return act.tag


def _pack_layer(W, b, tag):
    out_dim, in_dim = W.shape
    parts = [struct.pack("<IIB", in_dim, out_dim, tag)]
    parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def _pack_head(head):
    parts = [HEAD_TAG]
    parts.append(struct.pack("<III", head.num_classes, head.concat_width, len(head.included_layers)))
    parts.append(struct.pack(f"<{len(head.included_layers)}I", *head.included_layers))
    parts.append(np.ascontiguousarray(head.W, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(head.b, dtype="<f8").tobytes())
    return b"".join(parts)


def network_bytes(net, head=None):
    """Serialized form of a network (plus optional head) as bytes."""
    if isinstance(net, FFNetwork):
        parts = [FF_MAGIC, struct.pack("<I", len(net.layers))]
        for layer in net.layers:
            parts.append(_pack_layer(layer.W, layer.b, _canonical_tag(layer.act)))
    elif isinstance(net, BPNetwork):
        layers = list(net.layers) + [net.out_layer]
        parts = [BP_MAGIC, struct.pack("<I", len(layers))]
        for layer in layers:
            tag = LINEAR_TAG if layer.act is None else _canonical_tag(layer.act)
            parts.append(_pack_layer(layer.W, layer.b, tag))
    else:
        raise UsageError(f"cannot checkpoint a {type(net).__name__}")
    if head is not None:
        parts.append(_pack_head(head))
    return b"".join(parts)


def save_network(path, net, head=None):
    with open(path, "wb") as f:
        f.write(network_bytes(net, head))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated checkpoint: wanted {n} bytes for {what}, "
                f"have {len(self.data) - self.pos}",
                offset=self.pos,
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what):
        return self.take(1, what)[0]

    def f64_array(self, count, what):
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).copy()


def _read_layers(r, count):
    out = []
    for li in range(count):
        in_dim = r.u32(f"layer {li} in_width")
        out_dim = r.u32(f"layer {li} out_width")
        tag = r.u8(f"layer {li} activation tag")
        W = r.f64_array(out_dim * in_dim, f"layer {li} weights").reshape(out_dim, in_dim)
        b = r.f64_array(out_dim, f"layer {li} bias")
        out.append((in_dim, out_dim, tag, W, b))
    return out


def _read_head(r, head_lr):
    num_classes = r.u32("head num_classes")
    concat_width = r.u32("head concat_width")
    n_inc = r.u32("head n_included")
    included = tuple(
        struct.unpack(f"<{n_inc}I", r.take(4 * n_inc, "head included layers"))
    )
    W = r.f64_array(num_classes * concat_width, "head weights").reshape(
        num_classes, concat_width
    )
    b = r.f64_array(num_classes, "head bias")
    return ClassifierHead(
        W=W,
        b=b,
        adam_W=AdamState.for_param(W.shape, head_lr),
        adam_b=AdamState.for_param(b.shape, head_lr),
        included_layers=included,
    )


def load_network(path, lr=0.01, head_lr=1e-3):
    """Returns (net, head_or_None); accepts both container magics."""
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic not in (FF_MAGIC, BP_MAGIC):
        raise FormatError(f"bad checkpoint magic {magic!r}", offset=0)
    count = r.u32("layer count")
    specs = _read_layers(r, count)

    if magic == FF_MAGIC:
        layers = []
        for in_dim, out_dim, tag, W, b in specs:
            layers.append(
                FFLayer(in_dim, out_dim, activation_by_tag(tag), lr, W=W, b=b)
            )
        net = FFNetwork.from_layer_list(specs[0][0] if specs else 0, layers)
    else:
        if len(specs) < 2:
            raise FormatError("BPN1 checkpoint needs hidden and output layers", offset=4)
        hidden = []
        for in_dim, out_dim, tag, W, b in specs[:-1]:
            hidden.append(DenseLayer(in_dim, out_dim, activation_by_tag(tag), lr, W=W, b=b))
        in_dim, out_dim, tag, W, b = specs[-1]
        if tag != LINEAR_TAG:
            raise FormatError(
                f"BPN1 output layer must be linear (tag {LINEAR_TAG}), got {tag}",
                offset=r.pos,
            )
        out_layer = DenseLayer(in_dim, out_dim, None, lr, W=W, b=b)
        net = BPNetwork.from_parts(specs[0][0], out_dim, hidden, out_layer)

    head = None
    if r.pos < len(data):
        tag = r.take(4, "trailing section tag")
        if tag != HEAD_TAG:
            raise FormatError(f"unknown trailing section {tag!r}", offset=r.pos - 4)
        head = _read_head(r, head_lr)
    if r.pos != len(data):
        raise FormatError(
            f"{len(data) - r.pos} unexpected trailing bytes", offset=r.pos
        )
    return net, head
