"""Exact simulation and analysis of erasure-channel protocols assisted by
backward classical communication."""

from .bounds import (
    capacity_reference,
    figure1_data,
    new_lower_bound,
    new_upper_bound,
    prior_bounds,
)
from .channel import ChannelConfig, ErasureChannel, expected_uses_per_success, transmit
from .core import (
    DensityOp,
    LabeledState,
    Party,
    SystemLabel,
    apply_gate,
    coherent_copy,
    coherent_information,
    entropy,
    fidelity,
    make_bell,
    make_ghz,
    mutual_information,
    partial_trace,
    prepare_message,
    random_pure_state,
    tensor,
    trace_distance,
)
from .protocols import run_protocol, subprotocol1_send, subprotocol2_send

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig",
    "DensityOp",
    "ErasureChannel",
    "LabeledState",
    "Party",
    "SystemLabel",
    "apply_gate",
    "capacity_reference",
    "coherent_copy",
    "coherent_information",
    "entropy",
    "expected_uses_per_success",
    "fidelity",
    "figure1_data",
    "make_bell",
    "make_ghz",
    "mutual_information",
    "new_lower_bound",
    "new_upper_bound",
    "partial_trace",
    "prepare_message",
    "prior_bounds",
    "random_pure_state",
    "run_protocol",
    "subprotocol1_send",
    "subprotocol2_send",
    "tensor",
    "trace_distance",
    "transmit",
]
