from .lookahead import build_lookahead, window_blocks
from .simplex import LinearProgram, LpSolution, SimplexError, dump, solve

__all__ = [
    "LinearProgram",
    "LpSolution",
    "SimplexError",
    "build_lookahead",
    "dump",
    "solve",
    "window_blocks",
]
