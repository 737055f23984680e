"""Restoration planning for underground distribution feeders.

The package models a medium-voltage underground distribution system
(switchgear-coupled underground laterals fed from an overhead main feeder),
formulates the multi-period restoration problem as a mixed-binary linear
program with second-order cone rows, solves it with a built-in
branch-and-bound over an LP relaxation with outer-approximation cuts, and
validates any plan against exact physics oracles that are independent of the
optimization encoding.
"""

from ugrestore.feeder import (
    CaseConfig,
    CaseError,
    CaseInvariantError,
    CaseSchemaError,
    DerUnit,
    EssUnit,
    FeederCase,
    Line,
    Node,
    ResUnit,
    Switchgear,
    load_case,
    load_case_dict,
    save_case,
)
from ugrestore.physics import (
    PERMUTATIONS,
    apply_phase_swap,
    damping_resistance,
    equivalent_capacitance_farads,
    exact_phasor_difference,
    inrush_peak,
    phase_deviation,
    q_factor,
    reorder_impedance,
    resonant_inductance,
    squared_voltage_difference,
)
from ugrestore.quantile import normal_cdf, normal_quantile

__version__ = "0.1.0"

__all__ = [
    "CaseConfig",
    "CaseError",
    "CaseInvariantError",
    "CaseSchemaError",
    "DerUnit",
    "EssUnit",
    "FeederCase",
    "Line",
    "Node",
    "ResUnit",
    "Switchgear",
    "load_case",
    "load_case_dict",
    "save_case",
    "PERMUTATIONS",
    "apply_phase_swap",
    "damping_resistance",
    "equivalent_capacitance_farads",
    "exact_phasor_difference",
    "inrush_peak",
    "phase_deviation",
    "q_factor",
    "reorder_impedance",
    "resonant_inductance",
    "squared_voltage_difference",
    "normal_cdf",
    "normal_quantile",
]
