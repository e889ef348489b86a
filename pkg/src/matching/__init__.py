from .matcher import cost_matrix, pairwise_iou, solve_assignment, labels_from_matching, oracle_filter
