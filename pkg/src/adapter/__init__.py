from .positional import encode_coords, build_grid
from .layers import AttentionBlock, mlp
from .prompt_encoder import PromptEncoder
from .classifier import MaskClassifier, keep_mask, select
from .model import DLOAdapter, count_parameters
from .checkpoint import FORMAT_VERSION, save_adapter, load_adapter, read_checkpoint
