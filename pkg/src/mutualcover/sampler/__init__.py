"""Selecting codeword indices so the selected pair simulates a target law."""
from .evaluate import (DualityReport, duality_check, exact_tv_of_rule,
                       mc_tv_of_rule, weighted_sampler_rule)
from .flow import (FlowNetwork, SelectionResult, optimal_pair_sampler,
                   select_from_sequence, sequence_gap)
from .rule import KTypeQuantization, SelectionRule, largest_remainder

__all__ = [
    "DualityReport", "FlowNetwork", "KTypeQuantization", "SelectionResult",
    "SelectionRule", "duality_check", "exact_tv_of_rule", "largest_remainder",
    "mc_tv_of_rule", "optimal_pair_sampler", "select_from_sequence",
    "sequence_gap", "weighted_sampler_rule",
]
