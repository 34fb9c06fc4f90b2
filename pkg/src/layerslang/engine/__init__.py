"""numpy CPU runtime for Layers IR programs."""

from .runtime import DEFAULT_SEED, Engine, run_program

__all__ = ["DEFAULT_SEED", "Engine", "run_program"]
