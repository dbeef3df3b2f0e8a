"""Dual-brain AUV control stack."""
