"""Local session service and pipeline for generative-AI-assisted art therapy."""

__version__ = "0.1.0"
