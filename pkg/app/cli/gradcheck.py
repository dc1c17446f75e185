"""Finite-difference suite covering every differentiable component.

Each check declares its inputs and parameters in one double-precision
``ParamStore`` so input gradients are checked alongside weight gradients.
Outputs are reduced with fixed random weights to avoid symmetric
cancellation.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from loguru import logger

from app.cmea import enhance, infonce_loss, init_cmea_params, proxy_forward
from app.fusion import fusion_stack, init_fusion_params, pool_predict, total_loss
from app.model.network import HCMEN
from app.model.schemas import ModelConfig
from app.pipeline import collate, encode, init_encoder_params
from app.ssm import bi_mamba, init_bi_mamba_params, init_mamba_params, init_ssm_params, mamba_block, selective_scan
from app.tensor import (
    ACTIVATIONS,
    ParamStore,
    Tensor,
    activation,
    conv1d,
    depthwise_conv1d,
    finite_diff_report,
    l2_normalize,
    layer_norm,
    log_softmax,
    matmul,
    softmax,
    use_float64,
)
from app.training.synthetic import generate_synthetic

LossFn = Callable[[ParamStore], Tensor]
Builder = Callable[[np.random.Generator, int], Tuple[ParamStore, LossFn]]

TINY_CONFIG = dict(
    seq_len=4, d_model=8, d_state=2, n_fusion_blocks=1, batch_size=2, mamba_conv_width=3,
)


@dataclass(frozen=True)
class GradCheck:
    component: str
    name: str
    build: Builder


def _weighted_sum(rng: np.random.Generator, shape) -> Callable[[Tensor], Tensor]:
    weights = rng.normal(size=shape)
    return lambda out: (out * weights).sum()


def _op(shapes: Dict[str, tuple], fn: Callable[..., Tensor], out_shape: tuple) -> Builder:
    def build(rng, seed):
        store = ParamStore()
        for name, shape in shapes.items():
            store.declare(name, rng.normal(size=shape))
        reduce = _weighted_sum(rng, out_shape)
        return store, lambda s: reduce(fn(*(s[name] for name in shapes)))
    return build


def _ssm(rng, seed):
    store = ParamStore()
    params = init_ssm_params(store, "ssm", 3, 2, rng)
    store.declare("x", rng.normal(size=(2, 5, 3)))
    reduce = _weighted_sum(rng, (2, 5, 3))
    return store, lambda s: reduce(selective_scan(params, s["x"]))


def _mamba(rng, seed):
    store = ParamStore()
    params = init_mamba_params(store, "mamba", 4, 6, 2, 3, rng)
    store.declare("x", rng.normal(size=(2, 5, 4)))
    reduce = _weighted_sum(rng, (2, 5, 4))
    return store, lambda s: reduce(mamba_block(params, s["x"]))


def _bi_mamba(rng, seed):
    store = ParamStore()
    params = init_bi_mamba_params(store, "bi", 4, 6, 2, 3, rng)
    store.declare("x", rng.normal(size=(2, 5, 4)))
    reduce = _weighted_sum(rng, (2, 5, 4))
    return store, lambda s: reduce(bi_mamba(params, s["x"]))


def _encoder(rng, seed):
    config = ModelConfig(**TINY_CONFIG, seed=seed)
    store = ParamStore()
    params = init_encoder_params(store, "encoder", 3, config, rng)
    store.declare("x", rng.normal(size=(2, config.seq_len, 3)))
    reduce = _weighted_sum(rng, (2, config.seq_len, config.d_model))
    return store, lambda s: reduce(encode(s["x"], params))


def _proxy(rng, seed):
    config = ModelConfig(**TINY_CONFIG, seed=seed)
    store = ParamStore()
    params = init_cmea_params(store, "cmea", config, rng)
    store.declare("u", rng.normal(size=(2, 4, config.d_model)))
    reduce = _weighted_sum(rng, (2, 4, config.d_model))
    return store, lambda s: reduce(proxy_forward(s["u"], params.vision))


def _infonce(rng, seed):
    store = ParamStore()
    for name in ("e_v", "e_a", "u_t"):
        store.declare(name, rng.normal(size=(3, 4, 5)))
    return store, lambda s: infonce_loss(s["e_v"], s["e_a"], s["u_t"], 0.1)


def _enhance(rng, seed):
    config = ModelConfig(**TINY_CONFIG, seed=seed)
    store = ParamStore()
    params = init_cmea_params(store, "cmea", config, rng)
    for name in ("u_t", "u_v", "u_a"):
        store.declare(name, rng.normal(size=(3, 4, config.d_model)))

    def loss(s):
        proxies = enhance(s["u_t"], s["u_v"], s["u_a"], params, training=True, seed=seed)
        return infonce_loss(proxies.vision, proxies.audio, s["u_t"], params.temperature)
    return store, loss


def _fusion(rng, seed):
    config = ModelConfig(**TINY_CONFIG, seed=seed).model_copy(update={"n_fusion_blocks": 2})
    store = ParamStore()
    params = init_fusion_params(store, "fusion", config, rng)
    store.declare("m", rng.normal(size=(2, 3 * config.seq_len, config.d_model)))
    reduce = _weighted_sum(rng, (2,))
    return store, lambda s: reduce(pool_predict(fusion_stack(s["m"], params), params))


def _total_loss(rng, seed):
    store = ParamStore()
    store.declare("predictions", rng.normal(size=4))
    store.declare("alignment", rng.uniform(0.5, 1.5, size=()))
    labels = rng.uniform(-3, 3, size=4)
    return store, lambda s: total_loss(s["predictions"], labels, s["alignment"], 0.1)


def _end_to_end(rng, seed):
    config = ModelConfig(**TINY_CONFIG, seed=seed)
    dataset = generate_synthetic(None, n=2, lengths=(5, 6, 7), dims=(3, 4, 2), noise=0.1, seed=seed)
    batch = collate(dataset.utterances)
    model = HCMEN(config, dataset.dims)
    return model.params, lambda s: model.loss(batch, training=True, seed=seed).total


def checks() -> List[GradCheck]:
    suite = [
        GradCheck("tensor_core", "matmul", _op({"a": (3, 4), "b": (4, 2)}, matmul, (3, 2))),
        GradCheck("tensor_core", "depthwise_conv1d", _op(
            {"x": (2, 5, 3), "kernel": (3, 3), "bias": (3,)}, depthwise_conv1d, (2, 5, 3))),
        GradCheck("tensor_core", "causal_conv1d", _op(
            {"x": (5, 3), "kernel": (4, 3), "bias": (3,)},
            lambda x, k, b: depthwise_conv1d(x, k, b, causal=True), (5, 3))),
        GradCheck("tensor_core", "conv1d", _op(
            {"x": (2, 5, 3), "weight": (3, 3, 4), "bias": (4,)}, conv1d, (2, 5, 4))),
        GradCheck("tensor_core", "layer_norm", _op(
            {"x": (4, 6), "gamma": (6,), "beta": (6,)}, layer_norm, (4, 6))),
        GradCheck("tensor_core", "softmax", _op({"x": (3, 5)}, softmax, (3, 5))),
        GradCheck("tensor_core", "log_softmax", _op({"x": (3, 5)}, log_softmax, (3, 5))),
        GradCheck("tensor_core", "l2_normalize", _op({"x": (3, 5)}, l2_normalize, (3, 5))),
    ]
    for kind in ACTIVATIONS:
        suite.append(GradCheck(
            "tensor_core", f"activation:{kind}",
            _op({"x": (3, 4)}, lambda x, kind=kind: activation(x, kind), (3, 4)),
        ))
    suite += [
        GradCheck("ssm_mamba", "selective_scan", _ssm),
        GradCheck("ssm_mamba", "mamba_block", _mamba),
        GradCheck("ssm_mamba", "bi_mamba", _bi_mamba),
        GradCheck("modality_pipeline", "hierarchical_encode", _encoder),
        GradCheck("cmea", "proxy_forward", _proxy),
        GradCheck("cmea", "infonce_loss", _infonce),
        GradCheck("cmea", "enhance", _enhance),
        GradCheck("fusion_head", "fusion_stack", _fusion),
        GradCheck("fusion_head", "total_loss", _total_loss),
        GradCheck("end_to_end", "hcmen_total_loss", _end_to_end),
    ]
    return suite


def run_suite(
    seed: int,
    eps: float = 1e-5,
    samples: int = 6,
    floor: float = 1e-3,
    perturb: float = 0.0,
) -> Dict[str, Dict[str, float]]:
    """Worst relative error of every check, grouped by component."""
    results: Dict[str, Dict[str, float]] = {}
    with use_float64():
        for check in checks():
            rng = np.random.default_rng(seed)
            store, loss = check.build(rng, seed)
            report = finite_diff_report(loss, store, eps=eps, samples=samples, seed=seed, floor=floor, perturb=perturb)
            worst = max(report.values(), default=0.0)
            results.setdefault(check.component, {})[check.name] = worst
            logger.debug(f"gradcheck {check.component}/{check.name}: {worst:.3e}")
    return results
