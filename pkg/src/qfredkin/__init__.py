"""Linear-optical quantum Fredkin gate simulator."""
__version__ = "0.1.0"
