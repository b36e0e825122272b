"""Exact branch-and-price solver for robust multi-day home-healthcare
routing and scheduling under budget uncertainty."""

__version__ = "0.1.0"

from .backend import BACKEND  # noqa: F401
from .model import Instance, load_instance, save_instance  # noqa: F401
