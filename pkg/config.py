"""
COREL Lab Configuration Module
Central defaults for training, losses and clustering evaluation
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Paths
OUTPUT_DIR = os.getenv("COREL_OUTPUT_DIR", "./runs")
DATA_DIR = os.getenv("COREL_DATA_DIR", "./data")

# Logging
LOG_LEVEL = os.getenv("COREL_LOG_LEVEL", "INFO")
LOG_FILE = "corel.log"

# Network (FFNN with two 128-d hidden layers, LeakyReLU max(0.1x, x))
HIDDEN_SIZES = [128, 128]
LEAKY_SLOPE = 0.1
DROPOUT = 0.0  # 0.5 only mattered for text models

# Optimisation
EPOCHS = 150
BATCH_SIZE = 128
LEARNING_RATE = 1e-4
ADAM = {
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8
}

# Loss hyperparameters
GAMMA = 0.5           # Gaussian similarity width, 1 / (2 sigma^2)
CENTER_ALPHA = 0.25   # center update rate
DEFAULT_LAMBDA = 0.5
NORM_EPSILON = 1e-12  # cosine norm floor
REDUCTION = "mean"

# Tuned lambda values (FFNN column)
TUNED_LAMBDAS = {
    "mnist": {"center": 0.45, "cosine": 0.20, "gaussian": 0.50},
    "fashion": {"center": 0.15, "cosine": 0.65, "gaussian": 0.50}
}
LAMBDA_GRID_SIZE = 20

# Data
MNIST_VALIDATION_SIZE = 5000
VAL_FRACTION = 0.15
TEST_FRACTION = 0.15

# Clustering
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6
GMM_MAX_ITER = 200
GMM_TOL = 1e-6
GMM_VAR_FLOOR = 1e-6
GMM_MIN_WEIGHT = 1e-8

# Artifacts
CSV_FLOAT_FORMAT = "%.17g"
CHECKPOINT_FORMAT = "corel-checkpoint"
CHECKPOINT_VERSION = 1

# Debug Mode
DEBUG_MODE = os.getenv("DEBUG_MODE", "False") == "True"
