"""Bitcoin proof of reserve and epoch light client, with a small STARK backend."""

__version__ = "0.1.0"
