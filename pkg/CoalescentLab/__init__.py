"""CoalescentLab - additive coalescents, Brownian fragmentations and their changes of measure."""
__version__ = "1.0"
