from .inference import StochasticOutputs, predict, predict_with_reliability, probs_to_labels, stochastic_passes
from .network import (
    DETERMINISTIC,
    STOCHASTIC,
    TRAIN,
    MacConfig,
    MacModel,
    forward,
    init_model,
    labels_to_index,
    loss_and_grads,
)
from .reliability import ReliabilityConfig, pairwise_abs_sum, pairwise_abs_sum_naive, reliability, reliability_naive
from .serialize import load_model, model_from_bytes, model_to_bytes, save_model
from .training import Adam, TrainingConfig, TrainingLog, train
