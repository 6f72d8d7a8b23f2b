"""Training side of the anomaly-detection pipeline.

Trains the inception-style convolutional autoencoder on normal-class images
and exports the weight and embedding containers the inference engine reads.
"""

from .data import prepare_split, synthetic_images
from .export import export_artifacts, weights_from_model
from .model import InceptionCAE
from .train import TrainConfig, gradient_check, train_inception_cae

__version__ = "0.1.0"
