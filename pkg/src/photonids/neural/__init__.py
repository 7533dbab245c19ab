"""Small numpy neural-network engine and the two pipeline models."""
from .layers import (BatchNorm, Conv1d, Dense, Dropout, GlobalAvgPool, ReLU,
                     batchnorm_forward, conv1d_forward, cross_entropy_loss,
                     dense_forward, dropout, gap, mse_loss, relu, softmax)
from .models import CnnModel, FcnnModel, Sequential, classify, predict_positions
from .optim import AdamState, Optimizer, adam_init, adam_step
from .train import (CLASSIFIER_DEFAULTS, REGRESSOR_DEFAULTS, History, TrainConfig,
                    TrainingDiverged, train_classifier, train_regressor)
