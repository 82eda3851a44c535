"""Home-range estimation from duty-cycled observations of reflected diffusions."""

__version__ = "0.1.0"
