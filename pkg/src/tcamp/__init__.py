"""Joint activity detection and channel estimation for grant-free random
access, via approximate message passing with side information carried across
coherence blocks."""

__version__ = "0.1.0"
