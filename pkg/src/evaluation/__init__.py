from .metrics import iou, dice_score, matched_miou, union_dice, image_metrics
from .evaluator import (
    evaluate_image,
    evaluate_split,
    validation_metrics,
    matching_labels,
    classifier_accuracy,
    aggregate,
    evaluation_settings,
)
from .report import write_report, load_report, compare_reports, render_summary_table, write_comparison
