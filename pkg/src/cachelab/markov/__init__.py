"""Exact IRM steady-state solvers."""

from .chain import ChainResult, ChainSpec, brute_force_chain
from .lru import LruExact, lru_exact_hit_ratio, lru_exact_variable_size
from .product_form import (
    multilevel_product_form,
    probabilistic_substitution,
    product_form_hit_ratio,
)

__all__ = [
    "ChainResult",
    "ChainSpec",
    "LruExact",
    "brute_force_chain",
    "lru_exact_hit_ratio",
    "lru_exact_variable_size",
    "multilevel_product_form",
    "probabilistic_substitution",
    "product_form_hit_ratio",
]
