"""hmlab: a desk-scale lab for the lifted Hidden Matching problem in the one-way NOF model."""

__version__ = "0.1.0"
