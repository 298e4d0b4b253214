#!/usr/bin/env python3
"""Regenerate the workload network descriptions under data/networks/.

The four graphs model the published architectures we use as the cost
model's calibration workload.  They are geometry models: parameter file
paths are declared but not shipped, which is enough for validate/
estimate/sweep.  Two modeling liberties keep every stage inside the
accelerator's op set (see README):

  * a max-pool that follows a concat is fused into the convolutions
    feeding the concat (channel-wise pooling commutes with concat);
  * a pooled copy of a shared tensor goes through a 1x1 identity
    convolution with the pool fused behind it, and the dense-net
    transition average-pools are modeled as max-pools of the same
    geometry.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from convaccel.engine import PoolSpec
from convaccel.graph import ConvNode, HostNode, NetworkGraph, save_network

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "networks")

FO = 4  # uniform activation exponent; irrelevant to the cost model
FP = 7
FB = 7


def conv(net, node_id, src, *, f, s, p, co, relu=True, pool=None):
    return ConvNode(
        node_id, f, s, p, co, relu, pool, FO, FP, FB, f"params/{net}/{node_id}.qfb", (src,)
    )


def host(node_id, kind, srcs, units=0, params=None):
    return HostNode(node_id, kind, tuple(srcs), units, params)


def fire(net, name, src, squeeze, expand1, expand3, *, expand_stride=1, pool=None):
    """Squeeze/expand block; an optional pool is fused into both expands."""
    return [
        conv(net, f"{name}_s", src, f=1, s=1, p=0, co=squeeze),
        conv(net, f"{name}_e1", f"{name}_s", f=1, s=expand_stride, p=0, co=expand1, pool=pool),
        conv(net, f"{name}_e3", f"{name}_s", f=3, s=expand_stride, p=1, co=expand3, pool=pool),
        host(name, "concat", (f"{name}_e1", f"{name}_e3")),
    ]


def squeezenet_v11():
    n = "squeezenet_v11"
    nodes = [conv(n, "conv1", "input", f=3, s=2, p=0, co=64, pool=PoolSpec(3))]
    nodes += fire(n, "fire2", "conv1", 16, 64, 64)
    nodes += fire(n, "fire3", "fire2", 16, 64, 64, pool=PoolSpec(3))
    nodes += fire(n, "fire4", "fire3", 32, 128, 128)
    nodes += fire(n, "fire5", "fire4", 32, 128, 128, pool=PoolSpec(3))
    nodes += fire(n, "fire6", "fire5", 48, 192, 192)
    nodes += fire(n, "fire7", "fire6", 48, 192, 192)
    nodes += fire(n, "fire8", "fire7", 64, 256, 256)
    nodes += fire(n, "fire9", "fire8", 64, 256, 256)
    nodes.append(conv(n, "conv10", "fire9", f=1, s=1, p=0, co=1000))
    nodes.append(host("gap", "global_avg_pool", ("conv10",)))
    nodes.append(host("prob", "softmax", ("gap",)))
    return NetworkGraph(n, (227, 227, 3), FO, nodes)


def zynqnet():
    # All-convolutional squeeze/expand variant; downsampling happens in
    # stride-2 expand convolutions instead of pooling layers.
    n = "zynqnet"
    nodes = [conv(n, "conv1", "input", f=3, s=2, p=1, co=64)]
    nodes += fire(n, "fire2", "conv1", 16, 64, 64, expand_stride=2)
    nodes += fire(n, "fire3", "fire2", 16, 64, 64)
    nodes += fire(n, "fire4", "fire3", 32, 128, 128, expand_stride=2)
    nodes += fire(n, "fire5", "fire4", 32, 128, 128)
    nodes += fire(n, "fire6", "fire5", 64, 256, 256, expand_stride=2)
    nodes += fire(n, "fire7", "fire6", 64, 192, 192)
    nodes += fire(n, "fire8", "fire7", 112, 256, 256, expand_stride=2)
    nodes += fire(n, "fire9", "fire8", 112, 368, 368)
    nodes.append(conv(n, "conv10", "fire9", f=1, s=1, p=0, co=1024))
    nodes.append(host("gap", "global_avg_pool", ("conv10",)))
    nodes.append(host("prob", "softmax", ("gap",)))
    return NetworkGraph(n, (256, 256, 3), FO, nodes)


def dense_layer(net, name, src, n_in, bottleneck, growth):
    """Two-way dense layer: both branches produce growth/2 channels."""
    half = growth // 2
    return [
        conv(net, f"{name}_b1a", src, f=1, s=1, p=0, co=bottleneck),
        conv(net, f"{name}_b1b", f"{name}_b1a", f=3, s=1, p=1, co=half),
        conv(net, f"{name}_b2a", src, f=1, s=1, p=0, co=bottleneck),
        conv(net, f"{name}_b2b", f"{name}_b2a", f=3, s=1, p=1, co=half),
        conv(net, f"{name}_b2c", f"{name}_b2b", f=3, s=1, p=1, co=half),
        host(name, "concat", (src, f"{name}_b1b", f"{name}_b2c")),
    ]


def peleenet():
    n = "peleenet"
    growth = 32
    nodes = [
        conv(n, "stem0", "input", f=3, s=2, p=1, co=32),
        conv(n, "stem_a1", "stem0", f=1, s=1, p=0, co=16),
        conv(n, "stem_a2", "stem_a1", f=3, s=2, p=1, co=32),
        # pooled copy of stem0 via an identity 1x1 with the pool fused
        conv(n, "stem_b", "stem0", f=1, s=1, p=0, co=32, pool=PoolSpec(2)),
        host("stem_cat", "concat", ("stem_a2", "stem_b")),
        conv(n, "stem_out", "stem_cat", f=1, s=1, p=0, co=32),
    ]
    src = "stem_out"
    channels = 32
    stages = ((3, 1), (4, 2), (8, 4), (6, 4))  # (dense layers, bottleneck width)
    for stage_idx, (layers, bw) in enumerate(stages, start=1):
        for i in range(1, layers + 1):
            name = f"s{stage_idx}_d{i}"
            nodes += dense_layer(n, name, src, channels, bw * growth // 2, growth)
            src = name
            channels += growth
        if stage_idx < 4:
            trans = f"trans{stage_idx}"
            nodes.append(conv(n, trans, src, f=1, s=1, p=0, co=channels, pool=PoolSpec(2)))
            src = trans
    nodes.append(conv(n, "final", src, f=1, s=1, p=0, co=704))
    nodes.append(host("gap", "global_avg_pool", ("final",)))
    nodes.append(host("fc", "fully_connected", ("gap",), units=1000, params=f"params/{n}/fc.qfb"))
    nodes.append(host("prob", "softmax", ("fc",)))
    return NetworkGraph(n, (224, 224, 3), FO, nodes)


def vgg16():
    n = "vgg16"
    plan = [
        ("conv1_1", 64, None),
        ("conv1_2", 64, PoolSpec(2)),
        ("conv2_1", 128, None),
        ("conv2_2", 128, PoolSpec(2)),
        ("conv3_1", 256, None),
        ("conv3_2", 256, None),
        ("conv3_3", 256, PoolSpec(2)),
        ("conv4_1", 512, None),
        ("conv4_2", 512, None),
        ("conv4_3", 512, PoolSpec(2)),
        ("conv5_1", 512, None),
        ("conv5_2", 512, None),
        ("conv5_3", 512, PoolSpec(2)),
    ]
    nodes = []
    src = "input"
    for name, co, pool in plan:
        nodes.append(conv(n, name, src, f=3, s=1, p=1, co=co, pool=pool))
        src = name
    nodes.append(host("fc6", "fully_connected", (src,), units=4096, params=f"params/{n}/fc6.qfb"))
    nodes.append(host("fc7", "fully_connected", ("fc6",), units=4096, params=f"params/{n}/fc7.qfb"))
    nodes.append(host("fc8", "fully_connected", ("fc7",), units=1000, params=f"params/{n}/fc8.qfb"))
    nodes.append(host("prob", "softmax", ("fc8",)))
    return NetworkGraph(n, (224, 224, 3), FO, nodes)


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for build in (squeezenet_v11, zynqnet, peleenet, vgg16):
        net = build()
        path = os.path.join(OUT_DIR, f"{net.name}.net")
        save_network(net, path)
        convs = sum(1 for sn in net.shaped_nodes() if sn.spec is not None)
        print(f"{net.name}: {convs} accel layers, {net.mac_count()/1e6:.1f}M MACs -> {path}")


if __name__ == "__main__":
    main()
