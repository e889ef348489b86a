from .segmenter import Segmenter, SegmentationResult
from .overlay import instance_colors, render_overlay, summary, write_outputs
