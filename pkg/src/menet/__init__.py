"""Day-ahead and intra-day energy scheduling for a multi-energy network with EV charging stations."""

__version__ = "0.1.0"
