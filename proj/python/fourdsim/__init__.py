"""4D coherent transmission toolkit."""

try:
    from ._fourdsim import *  # noqa: F401,F403  (installed layout)
except ImportError:
    from _fourdsim import *  # noqa: F401,F403  (build-tree layout)
