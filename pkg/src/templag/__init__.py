"""Generalized Laguerre function spectral methods for tempered fractional equations."""
