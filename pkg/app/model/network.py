"""HCMEN model assembly."""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from loguru import logger

from app.cmea import CmeaParams, ProxyFeatures, enhance, infonce_loss, init_cmea_params
from app.exceptions import ConfigurationError, DimensionError
from app.fusion import FusionParams, fusion_stack, init_fusion_params, interleave, pool_predict, prediction_loss, total_loss
from app.model.schemas import ModelConfig
from app.pipeline import MODALITIES, EncoderParams, ModalityBatch, encode, init_encoder_params, resample_batch
from app.tensor import ParamStore, Tensor, no_grad

INIT_MODES = ("default", "zero_branches")


@dataclass(frozen=True)
class ForwardOutput:
    predictions: Tensor                  # [B]
    loss_c: Optional[Tensor]
    unimodal: Dict[str, Tensor]          # U_m, [B, L, D]
    proxies: Optional[ProxyFeatures]
    fused: Tensor                        # [B, 3L, D]


@dataclass(frozen=True)
class LossBreakdown:
    total: Tensor
    prediction: Tensor
    alignment: Tensor


class HCMEN:
    """Hybrid CNN-Mamba enhancement network.

    Args:
        config: Model hyperparameters.
        dims: Raw feature width per modality. Inferred from ``params`` when omitted.
        params: Existing parameters to bind (e.g. from a checkpoint). Names and
            shapes must match what ``config`` builds exactly.
        init: ``"default"`` or ``"zero_branches"``, which zeroes every
            non-residual branch and the prediction head weight.

    Raises:
        ConfigurationError: Unknown init mode or missing dims.
        DimensionError: ``params`` disagrees with the configured architecture.
    """

    def __init__(
        self,
        config: ModelConfig,
        dims: Optional[Dict[str, int]] = None,
        params: Optional[ParamStore] = None,
        init: str = "default",
    ):
        if init not in INIT_MODES:
            raise ConfigurationError(f"unknown init mode '{init}', expected one of {INIT_MODES}")
        self.config = config
        if dims is None:
            if params is None:
                raise ConfigurationError("HCMEN needs feature dims or a parameter store")
            dims = {m: params[f"encoder.{m}.proj.weight"].shape[1] for m in MODALITIES if f"encoder.{m}.proj.weight" in params}
        missing = [m for m in MODALITIES if m not in dims]
        if missing:
            raise ConfigurationError(f"feature dims missing for {missing}")
        self.dims = {m: int(dims[m]) for m in MODALITIES}

        zero = init == "zero_branches"
        dtype = params.dtype if params is not None else None
        fresh = ParamStore(dtype=dtype)
        self._build(fresh, zero)
        if params is None:
            self.params = fresh
        else:
            _check_compatible(fresh, params)
            self.params = params
            self._build(params, zero)
        logger.debug(f"HCMEN built with {self.params.num_parameters()} parameters")

    def _build(self, store: ParamStore, zero: bool) -> None:
        rng = np.random.default_rng(self.config.seed)
        self.encoders: Dict[str, EncoderParams] = {
            m: init_encoder_params(store, f"encoder.{m}", self.dims[m], self.config, rng, zero)
            for m in MODALITIES
        }
        self.cmea: Optional[CmeaParams] = (
            None if self.config.disable_cmea else init_cmea_params(store, "cmea", self.config, rng, zero)
        )
        self.fusion: FusionParams = init_fusion_params(store, "fusion", self.config, rng, zero)

    def num_parameters(self) -> int:
        return self.params.num_parameters()

    def unimodal(self, batch: ModalityBatch) -> Dict[str, Tensor]:
        """Resample, project and encode every modality to ``[B, L, D]``."""
        out = {}
        for m in MODALITIES:
            x = resample_batch(batch.features[m], batch.lengths[m], self.config.seq_len)
            out[m] = encode(x.astype(self.params.dtype), self.encoders[m])
        return out

    def forward(self, batch: ModalityBatch, training: bool = False, seed: Optional[int] = None) -> ForwardOutput:
        u = self.unimodal(batch)
        proxies, loss_c = None, None
        if self.cmea is None:
            e_v, e_a = u["vision"], u["audio"]
        else:
            proxies = enhance(u["text"], u["vision"], u["audio"], self.cmea, training, seed)
            e_v, e_a = proxies.vision, proxies.audio
            loss_c = infonce_loss(e_v, e_a, u["text"], self.cmea.temperature)
        fused = fusion_stack(interleave(e_v, u["text"], e_a), self.fusion)
        return ForwardOutput(pool_predict(fused, self.fusion), loss_c, u, proxies, fused)

    def loss(self, batch: ModalityBatch, training: bool = True, seed: Optional[int] = None) -> LossBreakdown:
        out = self.forward(batch, training=training, seed=seed)
        alignment = out.loss_c if out.loss_c is not None else Tensor(0.0, dtype=self.params.dtype)
        total = total_loss(out.predictions, batch.labels, alignment, self.config.effective_alpha)
        prediction = prediction_loss(out.predictions, batch.labels)
        return LossBreakdown(total=total, prediction=prediction, alignment=alignment)

    def predict(self, batch: ModalityBatch) -> np.ndarray:
        with no_grad():
            return self.forward(batch, training=False).predictions.numpy().astype(np.float64)


def _check_compatible(expected: ParamStore, actual: ParamStore) -> None:
    missing = sorted(set(expected.names()) - set(actual.names()))
    extra = sorted(set(actual.names()) - set(expected.names()))
    if missing or extra:
        raise DimensionError(f"parameter names differ from the configured model: missing {missing[:5]}, unexpected {extra[:5]}")
    for name, tensor in expected.items():
        if actual[name].shape != tensor.shape:
            raise DimensionError(f"parameter '{name}' has shape {actual[name].shape}, model expects {tensor.shape}")
