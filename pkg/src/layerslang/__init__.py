"""Compiler and reference interpreter for the Layers experiment language."""

__version__ = "0.1.0"
