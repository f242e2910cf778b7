"""Masquage dynamique des jetons redondants entre images."""
from .dyn_mask import MaskPlan, apply_mask, build_mask, diff_matrix, evaluate_masking, plan_for_grid, summarize_plans
from .strategies import get_strategy

__all__ = ['MaskPlan', 'apply_mask', 'build_mask', 'diff_matrix', 'evaluate_masking', 'plan_for_grid',
           'summarize_plans', 'get_strategy']
