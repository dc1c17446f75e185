"""Test package for the HCMEN model."""
