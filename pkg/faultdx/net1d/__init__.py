from faultdx.net1d.layers import (
    Cache,
    ModelWeights,
    backward,
    backward_from_logits,
    forward,
    init_weights,
    loss,
    softmax,
)
from faultdx.net1d.model_file import ModelFileException, load_model, save_model
from faultdx.net1d.optim import AdamState, EarlyStopping, adam_step, adam_update
from faultdx.net1d.training import (
    EpochRecord,
    TrainedModel,
    TrainingException,
    accuracy,
    evaluate,
    predict,
    predict_proba,
    train,
)
