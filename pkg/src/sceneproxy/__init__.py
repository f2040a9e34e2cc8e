"""Prompt -> scene proxy toolchain: scene layout, camera planning, HDR
environment lighting, a direct-lighting proxy renderer, a toy latent
conditioning lab and control-fidelity metrics."""

__version__ = "0.1.0"
