"""HCMEN: hybrid CNN-Mamba multimodal sentiment model."""

__version__ = "0.1.0"
