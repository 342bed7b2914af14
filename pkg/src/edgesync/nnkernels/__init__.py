from .conv import (
    ConvPlan,
    ConvSpec,
    ShapeError,
    TensorShape,
    conv_area,
    conv_forward,
    conv_output_shape,
    conv_plan,
    pool_forward,
    pool_output_shape,
)
from .fc import (
    FCLayer,
    fc_backprop_step,
    fc_forward,
    fc_gradients,
    fc_layer_forward,
    fc_loss,
    fc_max_parallelism,
    fc_neuron,
    fc_schedule,
    fc_subtasks,
)
from .lstm import LstmModel, LstmParams, lstm_cell, lstm_forward, lstm_hidden
from .model import CnnModel, build_cnn, cnn_features, cnn_forward

__all__ = [
    "CnnModel", "ConvPlan", "ConvSpec", "FCLayer", "LstmModel", "LstmParams",
    "ShapeError", "TensorShape", "build_cnn", "cnn_features", "cnn_forward",
    "conv_area", "conv_forward", "conv_output_shape", "conv_plan", "fc_backprop_step",
    "fc_forward", "fc_gradients", "fc_layer_forward", "fc_loss", "fc_max_parallelism",
    "fc_neuron", "fc_schedule", "fc_subtasks", "lstm_cell", "lstm_forward",
    "lstm_hidden", "pool_forward", "pool_output_shape",
]
