"""Physics-guided feedforward networks for thin-plate natural frequencies."""

__version__ = "0.1.0"
