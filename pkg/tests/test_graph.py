import numpy as np
import pytest

from conftest import random_bank, random_instance, random_scheme, random_tensor, seeded, wide_open_config
from convaccel import (
    DfpScheme,
    LayerSpec,
    PoolSpec,
    QTensor3,
    accel_exec,
    dequantize,
    exec_with_split,
    parse_network,
    reshape_first_layer,
    run_network,
    save_bank,
    validate,
)
from convaccel.engine import plan_split
from convaccel.errors import LoadError, ParseError, ValidationError
from convaccel.graph import ConvNode, HostNode, NetworkGraph, save_network
from reference import layer_ref


def _conv_node(node_id, inputs, *, f=1, s=1, p=0, co=4, relu=False, pool=None,
               fo=4, fp=4, fb=4, params=None, emit=False):
    return ConvNode(node_id, f, s, p, co, relu, pool, fo, fp, fb, params, tuple(inputs), emit)


def _write_bank(rng, path, co, f, ci, wf, bf):
    bank = random_bank(rng, co, f, ci, wf=wf, bf=bf)
    save_bank(bank, path)
    return bank


# ---------------------------------------------------------------------------
# Construction, parsing, shapes
# ---------------------------------------------------------------------------


def test_shapes_and_frac_chain():
    net = NetworkGraph(
        "t",
        (8, 8, 3),
        4,
        [
            _conv_node("c1", ["input"], f=3, s=1, p=1, co=8, fo=5, pool=PoolSpec(2)),
            _conv_node("c2", ["c1"], co=6, fo=3),
            HostNode("gap", "global_avg_pool", ("c2",)),
            HostNode("fc", "fully_connected", ("gap",), units=10),
            HostNode("sm", "softmax", ("fc",)),
        ],
    )
    shapes = {sn.node_id: sn.out_geom for sn in net.shaped_nodes()}
    assert shapes == {
        "c1": (4, 4, 8),
        "c2": (4, 4, 6),
        "gap": (1, 1, 6),
        "fc": (1, 1, 10),
        "sm": (1, 1, 10),
    }
    c2 = net.shaped("c2")
    assert c2.spec.scheme == DfpScheme(5, 4, 4, 3)
    assert net.terminal_ids() == ("sm",)
    assert net.mac_count() == 8 * 8 * 8 * 9 * 3 + 4 * 4 * 6 * 1 * 8


def test_graph_rejects_malformed():
    with pytest.raises(ValidationError):
        NetworkGraph("t", (4, 4, 2), 4, [_conv_node("a", ["missing"])])
    with pytest.raises(ValidationError):
        NetworkGraph("t", (4, 4, 2), 4, [_conv_node("a", ["a"])])  # self-cycle
    with pytest.raises(ValidationError):
        NetworkGraph(
            "t",
            (4, 4, 2),
            4,
            [
                _conv_node("a", ["b"]),
                _conv_node("b", ["a"]),
            ],
        )
    with pytest.raises(ValidationError):  # concat frac mismatch
        NetworkGraph(
            "t",
            (4, 4, 2),
            4,
            [
                _conv_node("a", ["input"], fo=3),
                _conv_node("b", ["input"], fo=5),
                HostNode("cat", "concat", ("a", "b")),
            ],
        )


def test_topological_order_ignores_declaration_order(tmp_path):
    rng = seeded(71)
    ci = 3
    scheme_frac = 4
    bank_a = _write_bank(rng, tmp_path / "a.qfb", 4, 1, ci, scheme_frac, scheme_frac)
    bank_b = _write_bank(rng, tmp_path / "b.qfb", 5, 1, 4, scheme_frac, scheme_frac)

    nodes_fwd = [
        _conv_node("a", ["input"], co=4, params="a.qfb"),
        _conv_node("b", ["a"], co=5, params="b.qfb"),
    ]
    n1 = NetworkGraph("t", (5, 5, ci), scheme_frac, nodes_fwd, str(tmp_path))
    n2 = NetworkGraph("t", (5, 5, ci), scheme_frac, list(reversed(nodes_fwd)), str(tmp_path))
    ia = random_tensor(rng, 5, 5, ci, frac=scheme_frac)
    cfg = wide_open_config()
    out1, _ = run_network(n1, cfg, ia)
    out2, _ = run_network(n2, cfg, ia)
    assert out1.keys() == out2.keys()
    assert out1["b"] == out2["b"]


def test_parse_roundtrip(tmp_path):
    path = tmp_path / "net.net"
    path.write_text(
        "# demo\n"
        "network demo\n"
        "input 8 8 3\n"
        "input_frac 4\n"
        "node c1 conv filter=3 stride=2 pad=1 co=8 relu=1 pool=3x3s2 fo=4 fp=6 fb=5 "
        "params=c1.qfb inputs=input emit=1\n"
        "node gap global_avg_pool inputs=c1\n"
    )
    net = parse_network(str(path))
    assert net.name == "demo"
    assert net.input_geom == (8, 8, 3)
    c1 = net.nodes[0]
    assert (c1.filter, c1.stride, c1.padding, c1.co) == (3, 2, 1, 8)
    assert c1.pool == PoolSpec(3) and c1.relu and c1.emit
    out = tmp_path / "again.net"
    save_network(net, str(out))
    assert parse_network(str(out)).shaped("gap").out_geom == net.shaped("gap").out_geom


def test_parse_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.net"
    path.write_text("network x\ninput 4 4 2\ninput_frac 4\nnode a conv inputs=input\n")
    with pytest.raises(ParseError) as err:
        parse_network(str(path))
    assert "bad.net" in str(err.value)
    path.write_text("bogus directive\n")
    with pytest.raises(ParseError):
        parse_network(str(path))


# ---------------------------------------------------------------------------
# Legality
# ---------------------------------------------------------------------------


def test_validate_tiny_net_fits():
    net = NetworkGraph("t", (6, 6, 4), 4, [_conv_node("c", ["input"], co=4)])
    report = validate(net, wide_open_config())
    assert report.ok and report.rows[0].verdict == "fits"


def test_validate_unsupported_names_budget():
    net = NetworkGraph("t", (6, 6, 64), 4, [_conv_node("c", ["input"], f=3, s=1, p=1, co=4)])
    cfg = wide_open_config(chout_x_filter_x_filter_x_chin_max=100)
    report = validate(net, cfg)
    assert not report.ok
    assert "CHOUTxFILTERxFILTERxCHIN_MAX" in report.rows[0].detail

    cfg = wide_open_config(win_x_chin_pad_max=10)
    report = validate(net, cfg)
    assert "WINxCHIN_PAD_MAX" in report.rows[0].detail

    cfg = wide_open_config(filter_max=1)
    assert "FILTER_MAX" in validate(net, cfg).rows[0].detail


def test_validate_agrees_with_plan_split():
    rng = seeded(73)
    for _ in range(40):
        ci = rng.randint(1, 32)
        co = rng.randint(1, 64)
        f = rng.choice((1, 3))
        p = rng.choice((0, 1)) if f == 3 else 0
        net = NetworkGraph(
            "t", (8, 8, ci), 4, [_conv_node("c", ["input"], f=f, s=1, p=p, co=co)]
        )
        budget = rng.randint(1, 4096)
        cfg = wide_open_config(chout_x_filter_x_filter_x_chin_max=budget)
        row = validate(net, cfg).rows[0]
        try:
            groups = plan_split((co, f, f, ci), cfg).restreams
        except Exception:
            groups = None
        if groups is None:
            assert row.verdict == "unsupported"
        elif groups == 1:
            assert row.verdict == "fits"
        else:
            assert row.verdict == "split" and row.groups == groups


def test_validate_soundness_legal_layers_run(tmp_path):
    rng = seeded(79)
    for trial in range(10):
        ia, bank, spec = random_instance(rng, max_hw=6, max_ch=8)
        save_bank(bank, tmp_path / f"w{trial}.qfb")
        net = NetworkGraph(
            "t",
            ia.geom,
            spec.scheme.input_frac,
            [
                ConvNode(
                    "c",
                    spec.filter,
                    spec.stride,
                    spec.padding,
                    spec.co,
                    spec.relu,
                    spec.pool,
                    spec.scheme.output_frac,
                    spec.scheme.weight_frac,
                    spec.scheme.bias_frac,
                    f"w{trial}.qfb",
                    ("input",),
                )
            ],
            str(tmp_path),
        )
        cfg = wide_open_config(
            chout_x_filter_x_filter_x_chin_max=rng.randint(
                spec.filter**2 * ia.channels, 4 * spec.filter**2 * ia.channels * spec.co
            )
        )
        if validate(net, cfg).ok:
            run_network(net, cfg, ia)  # must not raise


# ---------------------------------------------------------------------------
# First-layer reshaping
# ---------------------------------------------------------------------------


def test_reshape_identity_for_stride1_1x1():
    spec = LayerSpec(1, 1, 0, 4, False, None, DfpScheme(4, 4, 4, 4))
    assert reshape_first_layer(spec, (8, 8, 2), icp=16) is None  # trigger unmet
    t = reshape_first_layer(spec, (8, 8, 2), icp=16, trigger=lambda *_: True)
    assert t.reshaped_spec == spec and t.reshaped_geom == (8, 8, 2)
    assert t.fold == 1 and t.fold_kernel == 1


def test_reshape_fold_geometry():
    spec = LayerSpec(3, 2, 1, 4, False, None, DfpScheme(4, 4, 4, 4))
    t = reshape_first_layer(spec, (8, 8, 3), icp=16)
    assert t is not None
    assert t.reshaped_geom == (4, 4, 12)
    assert t.fold_kernel == 2  # taps span a 2x2 folded window
    assert t.reshaped_spec.stride == 1


def test_reshape_trigger_rule():
    spec = LayerSpec(3, 2, 1, 4, False, None, DfpScheme(4, 4, 4, 4))
    assert reshape_first_layer(spec, (8, 8, 3), icp=32) is not None  # 3 < 16
    assert reshape_first_layer(spec, (8, 8, 16), icp=32) is None  # 16 == icp/2
    s1 = LayerSpec(3, 1, 1, 4, False, None, DfpScheme(4, 4, 4, 4))
    assert reshape_first_layer(s1, (8, 8, 3), icp=32) is None  # stride 1


def test_reshape_execution_bit_exact():
    rng = seeded(83)
    for _ in range(40):
        f = rng.choice((1, 3))
        p = rng.choice((0, 1)) if f == 3 else 0
        h = rng.randint(f, 11)
        x = rng.randint(f, 11)
        ci = rng.randint(1, 6)
        co = rng.randint(1, 8)
        scheme = random_scheme(rng)
        pool = None
        spec = LayerSpec(f, 2, p, co, rng.random() < 0.5, pool, scheme)
        ia = random_tensor(rng, h, x, ci, frac=scheme.input_frac)
        bank = random_bank(rng, co, f, ci, wf=scheme.weight_frac, bf=scheme.bias_frac)
        t = reshape_first_layer(spec, (h, x, ci), icp=32)
        assert t is not None
        assert t.run(ia, bank) == accel_exec(ia, bank, spec)


def test_reshape_with_pool_and_relu():
    rng = seeded(89)
    scheme = DfpScheme(4, 5, 5, 4)
    spec = LayerSpec(3, 2, 0, 6, True, PoolSpec(3), scheme)
    ia = random_tensor(rng, 13, 13, 3, frac=4)
    bank = random_bank(rng, 6, 3, 3, wf=5, bf=5)
    t = reshape_first_layer(spec, (13, 13, 3), icp=32)
    assert t.run(ia, bank) == accel_exec(ia, bank, spec)


def test_reshape_mac_conservation():
    rng = seeded(97)
    for _ in range(30):
        f = rng.choice((1, 3))
        p = rng.choice((0, 1)) if f == 3 else 0
        h = rng.randint(f, 12)
        x = rng.randint(f, 12)
        ci = rng.randint(1, 6)
        co = rng.randint(1, 10)
        spec = LayerSpec(f, 2, p, co, False, None, DfpScheme(4, 4, 4, 4))
        t = reshape_first_layer(spec, (h, x, ci), icp=32)
        assert t.mac_count_original() == t.mac_count_reshaped()
        assert t.reshaped_geom[2] >= ci


def test_reshape_activation_map_hits_real_data():
    spec = LayerSpec(3, 2, 1, 2, False, None, DfpScheme(4, 4, 4, 4))
    t = reshape_first_layer(spec, (5, 7, 2), icp=32)
    folded_h, folded_x, folded_c = t.reshaped_geom
    rng = seeded(3)
    ia = random_tensor(rng, 5, 7, 2, frac=4)
    folded = t.fold_input(ia)
    for fy in range(folded_h):
        for fx in range(folded_x):
            for fc in range(folded_c):
                src = t.map_activation(fy, fx, fc)
                got = folded.at(fy, fx, fc)
                if src is None:
                    assert got == 0
                else:
                    assert got == ia.at(*src)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _single_conv_net(tmp_path, rng, ia, bank, spec, node_id="c"):
    save_bank(bank, tmp_path / f"{node_id}.qfb")
    return NetworkGraph(
        "one",
        ia.geom,
        spec.scheme.input_frac,
        [
            ConvNode(
                node_id,
                spec.filter,
                spec.stride,
                spec.padding,
                spec.co,
                spec.relu,
                spec.pool,
                spec.scheme.output_frac,
                spec.scheme.weight_frac,
                spec.scheme.bias_frac,
                f"{node_id}.qfb",
                ("input",),
            )
        ],
        str(tmp_path),
    )


def test_run_single_conv_equals_engine(tmp_path):
    rng = seeded(201)
    ia, bank, spec = random_instance(rng, max_hw=7, max_ch=8)
    net = _single_conv_net(tmp_path, rng, ia, bank, spec)
    cfg = wide_open_config()
    outputs, report = run_network(net, cfg, ia)
    assert outputs["c"] == exec_with_split(ia, bank, spec, cfg)
    assert report.layers[0].node_id == "c"
    assert report.conv_ms > 0


def test_run_two_branch_concat_duplicates_channels(tmp_path):
    rng = seeded(203)
    scheme = DfpScheme(4, 4, 4, 4)
    spec = LayerSpec(1, 1, 0, 3, False, None, scheme)
    ia = random_tensor(rng, 4, 4, 2, frac=4)
    bank = random_bank(rng, 3, 1, 2, wf=4, bf=4)
    save_bank(bank, tmp_path / "w.qfb")

    def conv(node_id):
        return ConvNode("%s" % node_id, 1, 1, 0, 3, False, None, 4, 4, 4, "w.qfb", ("input",))

    net = NetworkGraph(
        "twin",
        (4, 4, 2),
        4,
        [conv("a"), conv("b"), HostNode("cat", "concat", ("a", "b"))],
        str(tmp_path),
    )
    outputs, _ = run_network(net, wide_open_config(), ia)
    merged = outputs["cat"]
    assert merged.channels == 6
    half = accel_exec(ia, bank, spec)
    assert np.array_equal(merged.as_3d()[:, :, :3], half.as_3d())
    assert np.array_equal(merged.as_3d()[:, :, 3:], half.as_3d())


def test_run_pipeline_matches_oracle_composition(tmp_path):
    rng = seeded(207)
    scheme1 = DfpScheme(4, 5, 5, 3)
    scheme2 = DfpScheme(3, 4, 4, 3)
    ia = random_tensor(rng, 9, 9, 3, frac=4)
    bank1 = random_bank(rng, 5, 3, 3, wf=5, bf=5)
    bank2 = random_bank(rng, 4, 3, 5, wf=4, bf=4)
    save_bank(bank1, tmp_path / "w1.qfb")
    save_bank(bank2, tmp_path / "w2.qfb")
    spec1 = LayerSpec(3, 1, 1, 5, True, None, scheme1)
    spec2 = LayerSpec(3, 1, 0, 4, False, PoolSpec(2), scheme2)
    net = NetworkGraph(
        "pipe",
        (9, 9, 3),
        4,
        [
            ConvNode("c1", 3, 1, 1, 5, True, None, 3, 5, 5, "w1.qfb", ("input",)),
            ConvNode("c2", 3, 1, 0, 4, False, PoolSpec(2), 3, 4, 4, "w2.qfb", ("c1",)),
            HostNode("cat", "concat", ("c2", "c2")),
        ],
        str(tmp_path),
    )
    outputs, _ = run_network(net, wide_open_config(), ia, emits=("c1",))
    mid_vals = layer_ref(ia, bank1, spec1)
    assert list(outputs["c1"].values) == mid_vals
    mid = QTensor3(9, 9, 5, mid_vals, 3)
    end_vals = layer_ref(mid, bank2, spec2)
    end = np.array(end_vals).reshape(3, 3, 4)  # 9x9 -> conv pad0 7x7 -> pool 3x3
    expect = np.concatenate([end, end], axis=2).reshape(-1)
    assert list(outputs["cat"].values) == expect.tolist()


def test_fire_module_with_forced_splits_matches_oracle(tmp_path):
    # squeeze -> (expand1x1 | expand3x3, pools fused) -> concat, with the
    # weight budget forcing every conv into multiple groups
    rng = seeded(215)
    fi, fp, fb = 4, 5, 5
    ia = random_tensor(rng, 12, 12, 6, frac=fi)
    sq = random_bank(rng, 4, 1, 6, wf=fp, bf=fb)
    e1 = random_bank(rng, 8, 1, 4, wf=fp, bf=fb)
    e3 = random_bank(rng, 8, 3, 4, wf=fp, bf=fb)
    for name, bank in (("sq", sq), ("e1", e1), ("e3", e3)):
        save_bank(bank, tmp_path / f"{name}.qfb")
    net = NetworkGraph(
        "fire",
        (12, 12, 6),
        fi,
        [
            ConvNode("sq", 1, 1, 0, 4, True, None, 4, fp, fb, "sq.qfb", ("input",)),
            ConvNode("e1", 1, 1, 0, 8, True, PoolSpec(3), 4, fp, fb, "e1.qfb", ("sq",)),
            ConvNode("e3", 3, 1, 1, 8, True, PoolSpec(3), 4, fp, fb, "e3.qfb", ("sq",)),
            HostNode("cat", "concat", ("e1", "e3")),
        ],
        str(tmp_path),
    )
    cfg = wide_open_config(chout_x_filter_x_filter_x_chin_max=3 * 9 * 6)
    report = validate(net, cfg)
    assert report.ok and any(r.verdict == "split" for r in report.rows)
    outputs, _ = run_network(net, cfg, ia)

    sq_spec = LayerSpec(1, 1, 0, 4, True, None, DfpScheme(fi, fp, fb, 4))
    mid_vals = layer_ref(ia, sq, sq_spec)
    mid = QTensor3(12, 12, 4, mid_vals, 4)
    e1_spec = LayerSpec(1, 1, 0, 8, True, PoolSpec(3), DfpScheme(4, fp, fb, 4))
    e3_spec = LayerSpec(3, 1, 1, 8, True, PoolSpec(3), DfpScheme(4, fp, fb, 4))
    a = np.array(layer_ref(mid, e1, e1_spec)).reshape(5, 5, 8)
    b = np.array(layer_ref(mid, e3, e3_spec)).reshape(5, 5, 8)
    want = np.concatenate([a, b], axis=2).reshape(-1)
    assert list(outputs["cat"].values) == want.tolist()


def test_intermediate_equals_prefix_recomputation(tmp_path):
    rng = seeded(211)
    ia, bank, spec = random_instance(rng, max_hw=6, max_ch=6)
    net = _single_conv_net(tmp_path, rng, ia, bank, spec)
    outputs, _ = run_network(net, wide_open_config(), ia, emits=("input", "c"))
    assert outputs["input"] == ia
    assert outputs["c"] == accel_exec(ia, bank, spec)


def test_global_avg_pool_rounding(tmp_path):
    vals = [7, -7, 6, -6, 5, -5, 1, 2]  # two channels over 2x2
    ia = QTensor3(2, 2, 2, vals, 4)
    net = NetworkGraph("g", (2, 2, 2), 4, [HostNode("gap", "global_avg_pool", ("input",))])
    outputs, _ = run_network(net, wide_open_config(), ia)
    # channel 0: (7+6+5+1)/4 = 4.75 -> 5; channel 1: (-7-6-5+2)/4 = -4 -> -4
    assert outputs["gap"].values.tolist() == [5, -4]
    assert outputs["gap"].frac_bits == 4


def test_fully_connected_real_domain(tmp_path):
    rng = seeded(223)
    ia = random_tensor(rng, 2, 2, 3, frac=4)
    fc_bank = random_bank(rng, 4, 1, 12, wf=5, bf=5)
    save_bank(fc_bank, tmp_path / "fc.qfb")
    net = NetworkGraph(
        "f",
        (2, 2, 3),
        4,
        [
            HostNode("fc", "fully_connected", ("input",), units=4, params="fc.qfb"),
            HostNode("sm", "softmax", ("fc",)),
        ],
        str(tmp_path),
    )
    outputs, _ = run_network(net, wide_open_config(), ia, emits=("fc",))
    flat = dequantize(ia).values
    w = fc_bank.as_4d().reshape(4, 12) * 2.0**-5
    b = fc_bank.biases.astype(float) * 2.0**-5
    want = w @ flat + b
    assert np.allclose(outputs["fc"].values, want)
    sm = outputs["sm"].values
    assert sm.shape == (4,) and abs(sm.sum() - 1.0) < 1e-12
    e = np.exp(want - want.max())
    assert np.allclose(sm, e / e.sum())


def test_missing_params_is_load_error(tmp_path):
    rng = seeded(227)
    ia, bank, spec = random_instance(rng, max_hw=5, max_ch=5)
    net = _single_conv_net(tmp_path, rng, ia, bank, spec)
    (tmp_path / "c.qfb").unlink()
    with pytest.raises(LoadError):
        run_network(net, wide_open_config(), ia)


def test_bank_exponent_mismatch_is_load_error(tmp_path):
    rng = seeded(229)
    scheme = DfpScheme(4, 4, 4, 4)
    spec = LayerSpec(1, 1, 0, 2, False, None, scheme)
    ia = random_tensor(rng, 3, 3, 2, frac=4)
    bank = random_bank(rng, 2, 1, 2, wf=6, bf=4)  # fp disagrees with the node
    net = _single_conv_net(tmp_path, rng, ia, bank, spec)
    with pytest.raises(LoadError):
        run_network(net, wide_open_config(), ia)


def test_illegal_net_is_validation_error(tmp_path):
    rng = seeded(233)
    ia, bank, spec = random_instance(rng, max_hw=5, max_ch=5, pool_ok=False)
    net = _single_conv_net(tmp_path, rng, ia, bank, spec)
    cfg = wide_open_config(chout_x_filter_x_filter_x_chin_max=1)
    with pytest.raises(ValidationError):
        run_network(net, cfg, ia)
