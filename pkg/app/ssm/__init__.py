"""Diagonal state space kernels and the Mamba block family."""

from app.ssm.kernels import causal_convolve, discretize_zoh, lti_kernel, recurrent_scan
from app.ssm.mamba import (
    BiMambaParams,
    MambaBlockParams,
    SSMParams,
    bi_mamba,
    init_bi_mamba_params,
    init_mamba_params,
    init_ssm_params,
    mamba_block,
    selective_scan,
    selective_scan_kernel,
    tie_bi_mamba,
)

__all__ = [
    "BiMambaParams",
    "MambaBlockParams",
    "SSMParams",
    "bi_mamba",
    "causal_convolve",
    "discretize_zoh",
    "init_bi_mamba_params",
    "init_mamba_params",
    "init_ssm_params",
    "lti_kernel",
    "mamba_block",
    "recurrent_scan",
    "selective_scan",
    "selective_scan_kernel",
    "tie_bi_mamba",
]
