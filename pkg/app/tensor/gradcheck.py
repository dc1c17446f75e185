"""Central finite-difference validation of analytic gradients."""

from typing import Callable, Dict, Optional

import numpy as np
from loguru import logger

from app.exceptions import ContractError, NumericError
from app.tensor.core import ParamStore, Tensor, backward, no_grad

LossFn = Callable[[ParamStore], Tensor]


def _evaluate(f: LossFn, params: ParamStore) -> float:
    with no_grad():
        value = f(params).item()
    if not np.isfinite(value):
        raise NumericError(f"finite difference evaluation produced a non-finite loss: {value}")
    return value


def finite_diff_report(
    f: LossFn,
    params: ParamStore,
    eps: float = 1e-5,
    samples: Optional[int] = 6,
    seed: int = 0,
    floor: float = 0.0,
    perturb: float = 0.0,
) -> Dict[str, float]:
    """Worst relative gradient error per parameter tensor.

    The error of one coordinate is ``|a - n| / (|a| + |n| + φ + 1e-12)`` where
    ``a`` is the analytic gradient, ``n`` the central difference
    ``(f(θ + εe) - f(θ - εe)) / 2ε`` and ``φ = floor * max(1, max|a|)`` over the
    tensor. With ``floor=0`` this is the plain relative error. A positive floor
    turns it into a mixed absolute/relative test, so coordinates whose gradient
    is tiny next to the rest of the tensor are not judged on round-off alone.

    Args:
        f: Scalar loss as a function of the store.
        params: Parameters to check; mutated in place and restored.
        eps: Central difference step.
        samples: Coordinates sampled per tensor (``None`` checks all).
        seed: Coordinate sampling seed.
        floor: Absolute term of the denominator, relative to the tensor's gradient scale.
        perturb: Added to every analytic gradient (negative-control hook).

    Raises:
        ContractError: If ``eps`` or ``floor`` is out of range.
        NumericError: If ``f`` is non-finite at any perturbed point.
    """
    if eps <= 0:
        raise ContractError(f"finite difference step must be positive, got {eps}")
    if floor < 0:
        raise ContractError(f"floor must be non-negative, got {floor}")
    if params.dtype != np.float64:
        logger.warning(f"gradient check running in {params.dtype}; expect noisy differences")

    params.zero_grad()
    loss = f(params)
    if not np.isfinite(loss.item()):
        raise NumericError(f"loss is non-finite before differencing: {loss.item()}")
    backward(loss, params)

    rng = np.random.default_rng(seed)
    report: Dict[str, float] = {}
    for name, tensor in params.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        analytic = analytic.reshape(-1).astype(np.float64) + perturb
        scale = floor * max(1.0, float(np.max(np.abs(analytic), initial=0.0)))
        flat = tensor.data.reshape(-1)
        if samples is None or samples >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=samples, replace=False)

        worst = 0.0
        for coord in coords:
            original = flat[coord]
            flat[coord] = original + eps
            upper = _evaluate(f, params)
            flat[coord] = original - eps
            lower = _evaluate(f, params)
            flat[coord] = original

            numeric = (upper - lower) / (2.0 * eps)
            exact = float(analytic[coord])
            error = abs(exact - numeric) / (abs(exact) + abs(numeric) + scale + 1e-12)
            worst = max(worst, error)
        report[name] = worst

    params.zero_grad()
    return report


def finite_diff_check(
    f: LossFn,
    params: ParamStore,
    eps: float = 1e-5,
    samples: Optional[int] = 6,
    seed: int = 0,
    floor: float = 0.0,
    perturb: float = 0.0,
) -> float:
    """Maximum relative gradient error over the sampled coordinates of every tensor."""
    report = finite_diff_report(f, params, eps=eps, samples=samples, seed=seed, floor=floor, perturb=perturb)
    return max(report.values(), default=0.0)
