"""Closed-form covering and simulation bounds, plus asymptotic exponents."""
from .covering import (limited_independence_bound, multivariate_bound,
                       resolvability_bound, secondmoment_bound,
                       talagrand_bound, talagrand_denominator,
                       typical_bound_optimized, unilateral_bound)
from .exponents import (WeightedExponent, dee_exponent,
                        multivariate_dee_exponent, sim_exponent,
                        sim_exponent_report, weighted_exponent,
                        weighted_exponent_details, weighted_regime_check)
from .simulation import (second_order_error, sim_achievability_bound,
                         sim_converse_bound, weighted_sampler_bound,
                         worstcase_gap_bound)
from .types import BoundReport, CoveringSet, RatePair, probability_report

__all__ = [
    "BoundReport", "CoveringSet", "RatePair", "WeightedExponent",
    "dee_exponent", "limited_independence_bound", "multivariate_bound",
    "multivariate_dee_exponent", "probability_report", "resolvability_bound",
    "second_order_error", "secondmoment_bound", "sim_achievability_bound",
    "sim_converse_bound", "sim_exponent", "sim_exponent_report",
    "talagrand_bound", "talagrand_denominator", "typical_bound_optimized",
    "unilateral_bound", "weighted_exponent", "weighted_exponent_details",
    "weighted_regime_check", "weighted_sampler_bound", "worstcase_gap_bound",
]
