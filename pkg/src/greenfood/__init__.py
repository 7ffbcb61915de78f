"""Green food recommendation with sustainability-aware attention and losses."""
__version__ = "0.1.0"
