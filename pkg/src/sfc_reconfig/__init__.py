"""Re-optimization of service function chain placement under reconfiguration cost."""

__version__ = "0.1.0"
