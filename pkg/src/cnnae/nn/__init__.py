"""Minimal reverse-mode network engine: layers, BCE, Adam, gradient checking."""

from .gradcheck import gradient_check
from .layers import (BatchNorm, Conv1D, Dense, Dropout, Flatten, Layer, ReLU, Sigmoid,
                     activation_forward, conv1d_forward, dense_forward, dropout_forward, sigmoid)
from .losses import bce_grad, bce_loss
from .network import Network
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "BatchNorm", "Conv1D", "Dense", "Dropout", "Flatten", "Layer",
    "Network", "ReLU", "Sigmoid", "activation_forward", "adam_step", "bce_grad", "bce_loss",
    "conv1d_forward", "dense_forward", "dropout_forward", "gradient_check", "sigmoid",
]
