"""savanna: corpus engineering and MT evaluation for low-resource languages."""

from . import corpus, evalharness, instruct, leaderboard, metrics, preference_loss, textnorm

__version__ = "0.1.0"

__all__ = [
    "corpus",
    "evalharness",
    "instruct",
    "leaderboard",
    "metrics",
    "preference_loss",
    "textnorm",
    "__version__",
]
