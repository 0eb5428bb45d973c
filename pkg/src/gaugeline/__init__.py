"""Gauge-dependent energy levels and transient emission spectrum of a
charged oscillator perturbed by a passing relativistic charge cluster."""

__version__ = "0.1.0"

from .potentials import Gauge, HarmonicParams, SystemConfig  # noqa: E402

__all__ = ["Gauge", "HarmonicParams", "SystemConfig", "__version__"]
