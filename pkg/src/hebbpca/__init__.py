"""Convolutional networks trained with nonlinear Hebbian PCA rules and
evaluated with linear probes."""

from .checkpoint import load_checkpoint, save_checkpoint
from .conv import CenteringStats, HebbianLayer, Rule, conv_hebbian_step, layer_forward, update_centering
from .data import DatasetSplit, load_cifar10, load_mnist_idx, synth_gaussian, synth_mixture, synthetic_dataset
from .errors import BuildError, CheckpointError, DataFormatError, DimensionError, DivergenceError
from .network import (
    Network,
    NetworkSpec,
    TrainConfig,
    TrainReport,
    build_network,
    extract_features,
    reference_spec,
    retrain_upper_layers,
    train_hebbian,
    train_probe_on_layer,
)
from .oracle import batch_pca, cosine_alignment, kmeans
from .probe import LinearProbe, evaluate_accuracy, probe_sgd_step
from .rules import Nonlinearity, hebb_decay, hebb_plain, hpca_update, representation_error, sanger_update, wta_select, wta_update

__all__ = [
    "BuildError", "CenteringStats", "CheckpointError", "DataFormatError", "DatasetSplit", "DimensionError",
    "DivergenceError", "HebbianLayer", "LinearProbe", "Network", "NetworkSpec", "Nonlinearity", "Rule",
    "TrainConfig", "TrainReport", "batch_pca", "build_network", "conv_hebbian_step", "cosine_alignment",
    "evaluate_accuracy", "extract_features", "hebb_decay", "hebb_plain", "hpca_update", "kmeans",
    "layer_forward", "load_checkpoint", "load_cifar10", "load_mnist_idx", "probe_sgd_step", "reference_spec",
    "representation_error", "retrain_upper_layers", "sanger_update", "save_checkpoint", "synth_gaussian",
    "synth_mixture", "synthetic_dataset", "train_hebbian", "train_probe_on_layer", "update_centering",
    "wta_select", "wta_update",
]
