"""Dendritic cell algorithm and self-organizing map detectors for SYN-scan
sessions, with the signal pipeline, synthetic data and analysis around them."""

__version__ = "0.1.0"

from .dca import DcaParams, WeightMatrix, replay, run_session  # noqa: E402
from .signals import NormalizedSignalFrame, RawSample, SignalPipeline  # noqa: E402
from .som import SomMap, SomParams  # noqa: E402

__all__ = [
    "DcaParams", "WeightMatrix", "replay", "run_session",
    "NormalizedSignalFrame", "RawSample", "SignalPipeline",
    "SomMap", "SomParams",
]
