"""Mining @-mention call networks from GitHub discussions and modeling future @-mentions."""

__version__ = "0.1.0"
