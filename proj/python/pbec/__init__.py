"""Multimode photon condensate coherence simulator."""

from ._pbec import (
    Error,
    coherence,
    normalize_config,
    run_coherence,
    run_id,
    run_steady,
    run_sweep,
    run_verify,
    steady,
)

__all__ = [
    "Error",
    "coherence",
    "normalize_config",
    "run_coherence",
    "run_id",
    "run_steady",
    "run_sweep",
    "run_verify",
    "steady",
]
