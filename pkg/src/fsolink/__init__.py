"""Free-space optical link engineering: attenuation, budgets, OOK simulation."""

__version__ = "0.1.0"
