"""Metrics, significance testing and SVG figures."""
from .figures import confusion_svg, render_figures, roc_svg, table_svg, table_text
from .metrics import (ConfusionMatrix, Metrics, RocCurve, accuracy, auc_identity_error,
                      confusion, evaluate_scores, pairwise_auc, parse_metrics, permutation_test,
                      roc_curve, roc_ovr, trapezoid_auc)

__all__ = [
    "ConfusionMatrix", "Metrics", "RocCurve", "accuracy", "auc_identity_error", "confusion",
    "confusion_svg", "evaluate_scores", "pairwise_auc", "parse_metrics", "permutation_test",
    "render_figures", "roc_curve", "roc_ovr", "roc_svg", "table_svg", "table_text",
    "trapezoid_auc",
]
