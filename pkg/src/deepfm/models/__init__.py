from .spec import DEEPFM_KINDS, KINDS, WIDE_KINDS, ModelSpec
from .store import GradientSet, ParameterStore, load_checkpoint, save_checkpoint
from .zoo import (
    CTRModel,
    backward,
    build_model,
    embed,
    forward_deepfm,
    forward_dnn,
    forward_fm,
    forward_fnn,
    forward_hybrid,
    forward_lr,
    forward_pnn,
    forward_poly2,
    init_model,
    predict,
    pretrain_fnn,
)
