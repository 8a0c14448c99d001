"""Fluorescence-spectra SIL detection: preprocessing, PCA, RBF/MLP ensembles."""
__version__ = "0.1.0"
