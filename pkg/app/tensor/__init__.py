"""Dense tensors with reverse-mode gradients."""

from app.tensor.core import (
    ParamStore,
    Tensor,
    as_tensor,
    backward,
    find_first_nonfinite,
    get_default_dtype,
    no_grad,
    reshape,
    sum_axis,
    swapaxes,
    use_float64,
)
from app.tensor.gradcheck import finite_diff_check, finite_diff_report
from app.tensor.ops import (
    ACTIVATIONS,
    activation,
    conv1d,
    depthwise_conv1d,
    exp,
    l2_normalize,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    mean_axis,
    reverse_time,
    sigmoid,
    silu,
    slice_axis,
    softmax,
    softplus,
    stack,
    take,
    tanh,
    where,
)

__all__ = [
    "ACTIVATIONS",
    "ParamStore",
    "Tensor",
    "activation",
    "as_tensor",
    "backward",
    "conv1d",
    "depthwise_conv1d",
    "exp",
    "find_first_nonfinite",
    "finite_diff_check",
    "finite_diff_report",
    "get_default_dtype",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log_softmax",
    "matmul",
    "mean_axis",
    "no_grad",
    "reshape",
    "reverse_time",
    "sigmoid",
    "silu",
    "slice_axis",
    "softmax",
    "softplus",
    "stack",
    "sum_axis",
    "swapaxes",
    "take",
    "tanh",
    "use_float64",
    "where",
]
