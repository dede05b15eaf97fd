"""Mirror-flow training of shallow networks and the variational problems
that describe their implicit bias."""

__version__ = "0.1.0"
