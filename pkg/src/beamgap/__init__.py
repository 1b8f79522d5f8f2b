"""Beam-alignment simulator: geometric channels, UPA codebooks, beam
selection baselines, a beam-direction power regressor, and experiment
pipelines that quantify the generalization gap under antenna, codebook,
and location train/test mismatch."""

__version__ = "0.1.0"
