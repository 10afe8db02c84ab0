"""Self-similar sets, Hutchinson measures and operator identities on word cells."""

__version__ = "0.1.0"
