"""Time-indexed formulations, Dantzig-Wolfe decomposition and branch-and-price
for multi-mode resource-constrained multi-project scheduling."""

__version__ = "0.1.0"
