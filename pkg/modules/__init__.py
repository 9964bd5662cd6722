"""
Missing-view imputation for two-view tabular data: a small reverse-mode
autodiff engine, dense networks, the cycle-consistent GAN plus multi-modal
denoising autoencoder model, its three-stage trainer, data handling,
metrics, baselines and the command-line interface.
"""
import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())

__version__ = '1.0.0'
