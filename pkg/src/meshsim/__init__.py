"""Deterministic discrete-event simulator for multi-radio multi-channel
wireless mesh networks with partially overlapped channel interference,
modified RTS/CTS admission, and RTT-metric route repair."""

__version__ = "0.1.0"

from .channel import (
    SeparationClass,
    classify,
    interference_factor,
    separation,
)
from .mac import (
    RtsDecision,
    handle_rts_delay_tolerant,
    handle_rts_qos,
)

__all__ = [
    "SeparationClass",
    "classify",
    "interference_factor",
    "separation",
    "RtsDecision",
    "handle_rts_qos",
    "handle_rts_delay_tolerant",
    "__version__",
]
