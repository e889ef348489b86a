from .functional import (
    focal_loss,
    dice_loss,
    pairwise_focal,
    pairwise_dice,
    pair_loss,
    segmentation_loss,
    weighted_bce,
    total_loss,
)
