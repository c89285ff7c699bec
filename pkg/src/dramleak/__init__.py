"""Cell-level DRAM leakage simulator and attack-surface analyzer."""

__version__ = "0.1.0"

from dramleak.cell import (  # noqa: E402
    INFINITE,
    CellParams,
    DeviceConstants,
    Mechanism,
    Pattern,
    ReadOutcome,
)
from dramleak.stress import FlipObservation, FlipMap, StressSpec  # noqa: E402

__all__ = ["INFINITE", "CellParams", "DeviceConstants", "FlipMap", "FlipObservation",
           "Mechanism", "Pattern", "ReadOutcome", "StressSpec", "__version__"]
