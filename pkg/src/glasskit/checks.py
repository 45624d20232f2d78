"""Self-contained finite-difference verification suite.

Runs every differentiable layer (convolutions at each dilation rate,
normalization, resize, pooling, linear, squeeze-excite, the losses) and a
full toy network end to end, all in float64, against central differences.
Used by the `gradcheck` CLI subcommand and the acceptance tests.
"""

from dataclasses import dataclass

import numpy as np

from . import losses
from . import neural as nn
from .neural import functional as F
from .neural.gradcheck import tensor64
from .network import NetworkConfig, SqueezeExcite, ThreeStreamNet
from .rng import named_rng


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _run(name, loss_fn, wrt, seed, samples=4):
    failures = nn.check_gradients(loss_fn, wrt, named_rng(seed, f"fd-{name}"), samples_per_tensor=samples)
    detail = "; ".join(str(f) for f in failures[:3])
    return CheckResult(name=name, passed=not failures, detail=detail)


def _conv_check(seed, dilation):
    rng = named_rng(seed, f"conv{dilation}")
    size = 2 * dilation + 3
    x = tensor64(rng, (2, 3, size, size))
    w = tensor64(rng, (4, 3, 3, 3), scale=0.4)
    b = tensor64(rng, (4,), scale=0.1)

    def loss():
        out = F.conv2d(x, w, b, padding=dilation, dilation=dilation)
        return nn.tmean(nn.mul(out, out))

    return _run(f"conv2d dilation {dilation}", loss, [("x", x), ("w", w), ("b", b)], seed)


def _norm_check(seed, training):
    rng = named_rng(seed, f"norm{training}")
    x = tensor64(rng, (4, 3, 5, 5))
    gamma = nn.Tensor(np.abs(rng.standard_normal(3)) + 0.5, requires_grad=True)
    beta = tensor64(rng, (3,), scale=0.2)
    rm = rng.standard_normal(3) * 0.1
    rv = np.abs(rng.standard_normal(3)) + 0.7

    def loss():
        out = F.batch_norm(x, gamma, beta, rm.copy(), rv.copy(), training)
        return nn.tmean(nn.mul(out, nn.sigmoid(out)))

    mode = "train" if training else "eval"
    return _run(f"batch_norm {mode}", loss, [("x", x), ("gamma", gamma), ("beta", beta)], seed)


def _resize_check(seed):
    rng = named_rng(seed, "resize")
    x = tensor64(rng, (2, 2, 5, 7))

    def loss():
        up = F.bilinear_resize(x, 11, 9)
        down = F.bilinear_resize(up, 3, 4)
        return nn.tmean(nn.mul(down, down))

    return _run("bilinear_resize", loss, [("x", x)], seed, samples=8)


def _pool_linear_check(seed):
    rng = named_rng(seed, "pool")
    x = tensor64(rng, (3, 4, 4, 4))
    w = tensor64(rng, (4, 2), scale=0.5)
    b = tensor64(rng, (2,), scale=0.1)

    def loss():
        flat = nn.reshape(F.global_avg_pool(x), (3, 4))
        return nn.tmean(nn.mul(F.linear(flat, w, b), 1.0))

    return _run("global_avg_pool + linear", loss, [("x", x), ("w", w), ("b", b)], seed)


def _se_check(seed):
    rng = named_rng(seed, "se")
    se = SqueezeExcite(4, 4, rng, np.float64)
    x = tensor64(rng, (2, 4, 3, 3))

    def loss():
        out = se(x)
        return nn.tmean(nn.mul(out, out))

    return _run("squeeze_excite", loss, [("x", x)] + list(se.named_parameters()), seed)


def _loss_checks(seed):
    rng = named_rng(seed, "losses")
    z = tensor64(rng, (2, 1, 4, 4), scale=2.0)
    soft = rng.random((2, 1, 4, 4))
    hard = (rng.random((2, 1, 4, 4)) < 0.5).astype(np.float64)

    def bce():
        return losses.bce_loss(z, soft)

    def iou():
        return losses.iou_loss(nn.sigmoid(z), hard)

    return [
        _run("bce_loss", bce, [("logits", z)], seed, samples=8),
        _run("iou_loss", iou, [("logits", z)], seed, samples=8),
    ]


def _network_check(seed):
    cfg = NetworkConfig(input_size=16, encoder_channels=(4, 6, 8, 8, 8), decoder_width=8)
    net = ThreeStreamNet(cfg, named_rng(seed, "net-init"), dtype=np.float64)
    rng = named_rng(seed, "net-data")
    imgs = nn.Tensor(rng.random((2, 3, 16, 16)))
    glass = (rng.random((2, 1, 16, 16)) < 0.5).astype(np.float64)
    inner = glass * rng.random((2, 1, 16, 16))
    sup = losses.SupervisionSet(glass=glass, inner=inner, boundary=glass - inner)

    def loss():
        return losses.total_loss(net(imgs), sup).graph_total

    params = dict(net.named_parameters())
    probe_names = [
        "encoder.stages.0.entry.conv.weight",
        "encoder.stages.4.refine.conv.weight",
        "interior.project4.weight",
        "interior.context.branch_dilated.0.conv.weight",
        "boundary.merges.1.merge.conv.weight",
        "boundary.contexts.0.branch_dilated.3.conv.weight",
        "boundary_fuse.weight",
        "glass.merges.0.project.weight",
        "glass.contexts.0.fuse.conv.weight",
        "glass.heads.2.project.weight",
        "fusion.boundary_conv.conv.weight",
        "fusion.interior_se.fc2.weight",
        "final_head.refine.conv.weight",
        "final_head.project.bias",
    ]
    wrt = [(name, params[name]) for name in probe_names]
    return _run("full network 16x16", loss, wrt, seed, samples=2)


def run_gradient_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    for dilation in (1, 2, 4, 8, 16):
        results.append(_conv_check(seed, dilation))
    results.append(_norm_check(seed, True))
    results.append(_norm_check(seed, False))
    results.append(_resize_check(seed))
    results.append(_pool_linear_check(seed))
    results.append(_se_check(seed))
    results.extend(_loss_checks(seed))
    results.append(_network_check(seed))
    return results
