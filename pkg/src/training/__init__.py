from .schedule import lr_at, step_epoch
from .augment import augment, random_patch, step_rng
from .state import TrainState, save_state, load_state
from .curves import plot_curves
from .trainer import Trainer, StepLoss, FitResult, fit, load_split, epoch_order, report_parameters
