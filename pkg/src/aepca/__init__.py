"""PCA loading vectors recovered from the weights of a linear autoencoder."""

__version__ = "0.1.0"
