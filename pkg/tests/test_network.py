import numpy as np
import pytest

from glasskit import losses
from glasskit import neural as nn
from glasskit.errors import InvalidInputError
from glasskit.network import (
    BoundaryFusion,
    MultiDilationBlock,
    NetworkConfig,
    PredictHead,
    SqueezeExcite,
    ThreeStreamNet,
)
from glasskit.rng import named_rng

TOY = dict(encoder_channels=(4, 6, 8, 8, 8), decoder_width=8, se_reduction=4)


def toy_cfg(**overrides):
    base = dict(TOY, input_size=32)
    base.update(overrides)
    return NetworkConfig(**base)


def toy_net(seed=0, dtype=np.float32, **overrides):
    cfg = toy_cfg(**overrides)
    return ThreeStreamNet(cfg, named_rng(seed, "init"), dtype=dtype), cfg


def image_batch(seed, b, size, dtype=np.float32):
    rng = named_rng(seed, "image")
    return nn.Tensor(rng.random((b, 3, size, size)).astype(dtype))


# -- config ------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(InvalidInputError):
        NetworkConfig(dilation_rates=(4, 2))
    with pytest.raises(InvalidInputError):
        NetworkConfig(dilation_rates=(0, 2))
    with pytest.raises(InvalidInputError):
        NetworkConfig(input_size=40)
    with pytest.raises(InvalidInputError):
        NetworkConfig(encoder_channels=(8, 8, 8, 8))
    with pytest.raises(InvalidInputError):
        NetworkConfig(decoder_width=2, se_reduction=4)


# -- encoder -----------------------------------------------------------------


def test_encoder_stride_pyramid_64():
    net, _ = toy_net(input_size=64)
    feats = net.encoder(image_batch(1, 2, 64))
    assert [f.shape[2] for f in feats] == [32, 16, 8, 4, 2]
    assert all(f.shape[0] == 2 for f in feats)
    assert [f.shape[1] for f in feats] == list(TOY["encoder_channels"])


def test_encoder_16_floors_at_one_pixel():
    net, _ = toy_net(input_size=16)
    feats = net.encoder(image_batch(2, 1, 16))
    assert [f.shape[2] for f in feats] == [8, 4, 2, 1, 1]


def test_encoder_rejects_indivisible_input():
    net, _ = toy_net()
    with pytest.raises(InvalidInputError):
        net.encoder(nn.Tensor(np.zeros((1, 3, 40, 40), dtype=np.float32)))
    with pytest.raises(InvalidInputError):
        net.encoder(nn.Tensor(np.zeros((1, 3, 50, 50), dtype=np.float32)))


def test_encoder_zero_input_zero_features():
    net, _ = toy_net()
    feats = net.encoder(nn.Tensor(np.zeros((2, 3, 32, 32), dtype=np.float32)))
    for f in feats:
        np.testing.assert_allclose(f.data, 0.0, atol=1e-6)


# -- context block -----------------------------------------------------------


def test_context_block_preserves_shape():
    rng = named_rng(3, "mid")
    block = MultiDilationBlock(8, (2, 4, 8, 16), rng, np.float32)
    x = nn.Tensor(rng.standard_normal((2, 8, 16, 16)).astype(np.float32))
    assert block(x).shape == x.shape


def test_context_block_disabled_is_single_conv():
    rng = named_rng(4, "mid-off")
    block = MultiDilationBlock(8, (2, 4, 8, 16), rng, np.float32, enabled=False)
    x = nn.Tensor(rng.standard_normal((1, 8, 12, 12)).astype(np.float32))
    assert block(x).shape == x.shape
    names = [n for n, _ in block.named_parameters()]
    assert all(n.startswith("passthrough.") for n in names)


def test_context_block_impulse_support():
    # with positive weights, identity-normalization, and a positive impulse,
    # the response support along an axis spans 2*(1+2+4+8+16+1)+1 = 65 >= 61
    rng = named_rng(5, "impulse")
    block = MultiDilationBlock(4, (2, 4, 8, 16), rng, np.float32)
    for _, p in block.named_parameters():
        if p.data.ndim == 4:
            p.data[:] = 0.05
        else:
            p.data[:] = 1.0 if p.data.min() >= 0.5 else 0.0  # gamma 1, conv bias/beta 0
    block.eval()
    size = 81
    x = np.zeros((1, 4, size, size), dtype=np.float32)
    x[0, :, size // 2, size // 2] = 1.0
    out = block(nn.Tensor(x)).data[0, 0]
    row = out[size // 2]
    support = np.nonzero(row > 0)[0]
    width = support.max() - support.min() + 1
    assert width >= 1 + 2 * (2 + 4 + 8 + 16)


# -- squeeze-excite ----------------------------------------------------------


def test_squeeze_excite_gate_bounds_and_identity_limit():
    rng = named_rng(6, "se")
    se = SqueezeExcite(8, 4, rng, np.float32)
    x = nn.Tensor(rng.standard_normal((2, 8, 5, 5)).astype(np.float32))
    out = se(x)
    assert out.shape == x.shape
    ratio = out.data / np.where(np.abs(x.data) < 1e-9, 1.0, x.data)
    # forcing the gate open recovers the input
    se.fc2.bias.data[:] = 50.0
    se.fc2.weight.data[:] = 0.0
    np.testing.assert_allclose(se(x).data, x.data, rtol=1e-5)
    with pytest.raises(InvalidInputError):
        SqueezeExcite(2, 4, rng, np.float32)


def test_squeeze_excite_gradient():
    rng = named_rng(7, "se-grad")
    se = SqueezeExcite(4, 4, rng, np.float64)
    x = nn.Tensor(rng.standard_normal((2, 4, 3, 3)), requires_grad=True)

    def loss():
        out = se(x)
        return nn.tmean(nn.mul(out, out))

    wrt = [("x", x)] + list(se.named_parameters())
    failures = nn.check_gradients(loss, wrt, named_rng(8, "se-fd"))
    assert not failures, "\n".join(str(f) for f in failures)


# -- streams -----------------------------------------------------------------


def test_full_forward_bundle_arity_and_resolution():
    net, cfg = toy_net(input_size=32)
    out = net(image_batch(9, 2, 32))
    assert out.interior_logits is not None
    assert len(out.boundary_logits) == 5
    assert len(out.glass_logits) == 3
    assert len(out.supervised_maps()) == 10
    for m in out.supervised_maps():
        assert m.shape == (2, 1, 32, 32)
    assert out.glass_features.shape == (2, cfg.decoder_width, 16, 16)
    probs = nn.sigmoid(out.final_logits).data
    assert (probs > 0).all() and (probs < 1).all()


def test_forward_batch_dimension_preserved():
    net, _ = toy_net()
    for b in (1, 3):
        out = net(image_batch(10 + b, b, 32))
        assert out.final_logits.shape[0] == b


def test_forward_deterministic_same_seed():
    imgs = image_batch(11, 2, 32)
    a, _ = toy_net(seed=42)
    b, _ = toy_net(seed=42)
    out_a = a(imgs)
    out_b = b(imgs)
    for ma, mb in zip(out_a.supervised_maps(), out_b.supervised_maps()):
        np.testing.assert_array_equal(ma.data, mb.data)


def test_forward_twice_bit_identical_in_eval():
    net, _ = toy_net(seed=1)
    net.eval()
    imgs = image_batch(12, 1, 32)
    with nn.no_grad():
        first = net(imgs)
        second = net(imgs)
    np.testing.assert_array_equal(first.final_logits.data, second.final_logits.data)


def test_predict_head_output_is_single_channel():
    rng = named_rng(13, "head")
    head = PredictHead(8, rng, np.float32)
    feat = nn.Tensor(rng.standard_normal((2, 8, 8, 8)).astype(np.float32))
    out = head(feat, (32, 32))
    assert out.shape == (2, 1, 32, 32)
    assert np.isfinite(out.data).all()


def test_boundary_fusion_wiring():
    rng = named_rng(14, "bfm")
    bfm = BoundaryFusion(8, 4, rng, np.float32)
    feat = nn.Tensor(rng.standard_normal((2, 8, 6, 6)).astype(np.float32))
    ones = nn.Tensor(np.ones((2, 1, 6, 6), dtype=np.float32))
    zeros = nn.Tensor(np.zeros((2, 1, 6, 6), dtype=np.float32))
    out = bfm(feat, ones, zeros)
    assert out.shape == feat.shape
    out0 = bfm(feat, zeros, zeros)
    assert out0.shape == feat.shape and np.isfinite(out0.data).all()
    with pytest.raises(InvalidInputError):
        bfm(feat, nn.Tensor(np.ones((2, 1, 3, 3), dtype=np.float32)), ones)


# -- ablation wiring ---------------------------------------------------------


def stream_param_names(net, prefix):
    return [n for n, _ in net.named_parameters() if n.startswith(prefix)]


def test_ablations_change_exactly_their_paths():
    full, _ = toy_net(seed=2)
    full_names = dict(full.named_parameters())

    no_boundary, _ = toy_net(seed=2, enable_boundary_stream=False)
    removed = set(full_names) - {n for n, _ in no_boundary.named_parameters()}
    assert removed and all(n.startswith(("boundary.", "boundary_fuse.")) for n in removed)

    no_interior, _ = toy_net(seed=2, enable_interior_stream=False)
    removed = set(full_names) - {n for n, _ in no_interior.named_parameters()}
    assert removed and all(n.startswith("interior.") for n in removed)

    no_bfm, _ = toy_net(seed=2, enable_bfm=False)
    removed = set(full_names) - {n for n, _ in no_bfm.named_parameters()}
    assert removed and all(n.startswith(("fusion.", "boundary_fuse.")) for n in removed)

    no_mid, _ = toy_net(seed=2, enable_mid=False)
    assert no_mid.parameter_count() < full.parameter_count()


def make_supervision(shape):
    rng = named_rng(20, "sup")
    glass = (rng.random(shape) < 0.5).astype(np.float32)
    inner = (glass * rng.random(shape)).astype(np.float32)
    return losses.SupervisionSet(glass=glass, inner=inner, boundary=glass - inner)


@pytest.mark.parametrize(
    "overrides,zero_terms",
    [
        (dict(enable_boundary_stream=False), {"l_boundary"}),
        (dict(enable_interior_stream=False), {"l_inner"}),
        (dict(enable_boundary_stream=False, enable_interior_stream=False), {"l_boundary", "l_inner"}),
        (dict(enable_bfm=False), set()),
        (dict(enable_mid=False), set()),
    ],
)
def test_ablation_loss_terms(overrides, zero_terms):
    net, cfg = toy_net(seed=3, **overrides)
    out = net(image_batch(21, 1, 32))
    sup = make_supervision((1, 1, 32, 32))
    bd = losses.total_loss(out, sup, n_g=cfg.n_glass_branches, n_b=cfg.n_boundary_branches)
    for term in ("l_inner", "l_boundary", "l_glass", "l_final"):
        value = getattr(bd, term)
        if term in zero_terms:
            assert value == 0.0
        else:
            assert value > 0.0
    nn.backward(bd.graph_total)
    for name, p in net.named_parameters():
        assert p.grad is not None, f"no grad for {name}"


# -- end-to-end gradient -----------------------------------------------------


def test_full_network_finite_difference_16px():
    cfg = NetworkConfig(input_size=16, **TOY)
    net = ThreeStreamNet(cfg, named_rng(30, "init64"), dtype=np.float64)
    rng = named_rng(31, "fd-data")
    imgs = nn.Tensor(rng.random((2, 3, 16, 16)))
    sup = losses.SupervisionSet(
        glass=(rng.random((2, 1, 16, 16)) < 0.5).astype(np.float64),
        inner=rng.random((2, 1, 16, 16)) * 0.5,
        boundary=rng.random((2, 1, 16, 16)) * 0.5,
    )

    def loss():
        return losses.total_loss(net(imgs), sup).graph_total

    params = dict(net.named_parameters())
    probe = [
        "encoder.stages.0.entry.conv.weight",
        "encoder.stages.4.refine.norm.gamma",
        "interior.project5.weight",
        "boundary.merges.2.project.weight",
        "boundary.contexts.0.branch_dilated.3.conv.weight",
        "boundary_fuse.weight",
        "glass.merges.0.merge.conv.weight",
        "glass.heads.0.project.bias",
        "fusion.boundary_se.fc1.weight",
        "fusion.interior_conv.conv.weight",
        "final_head.refine.norm.beta",
    ]
    wrt = [(name, params[name]) for name in probe]
    failures = nn.check_gradients(loss, wrt, named_rng(32, "fd-net"), samples_per_tensor=3)
    assert not failures, "\n".join(str(f) for f in failures)
