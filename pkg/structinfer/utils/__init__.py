"""
Utility functions and helpers used throughout structinfer.
"""

from .logging import setup_logging
from .numeric import log_prob, sigmoid, softmax

__all__ = ["log_prob", "setup_logging", "sigmoid", "softmax"]
