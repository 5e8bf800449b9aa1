"""Illness-death models for semi-competing risks: simulation, likelihood fitting and MCMC."""

from .aft import *  # noqa: F401,F403
from .bayes_phr import *  # noqa: F401,F403
from .cli import run_cli  # noqa: F401
from .data import *  # noqa: F401,F403
from .diagnostics import *  # noqa: F401,F403
from .freq import *  # noqa: F401,F403
from .pem import *  # noqa: F401,F403
from .samples import *  # noqa: F401,F403
from .simulate import *  # noqa: F401,F403
from .truncnorm import *  # noqa: F401,F403

__version__ = "0.1.0"
