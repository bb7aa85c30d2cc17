"""Desk-scale workbench for learning personalized robot navigation
from drawn demonstrations, with a depth-scan perception pipeline and a
deviation-aware trajectory similarity metric."""

__version__ = "0.1.0"
