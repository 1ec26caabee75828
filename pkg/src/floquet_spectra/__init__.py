"""Spectral statistics of Floquet random circuits and exact Weingarten calculus."""

from floquet_spectra.rng import SeedSpec, cue_sample, derive_stream

__version__ = "0.1.0"

__all__ = ["SeedSpec", "cue_sample", "derive_stream", "__version__"]
