"""UA-SD MIMO-NOMA precoding, finite-size eigenvalue densities and ergodic rate regions."""

from .errors import (DimensionError, DomainError, InfinitePower, MaxIterations, NomaError, QuadratureError,
                     RankDeficient, SolverFailure)
from .system import (ChannelPair, DerivedDims, PowerAllocation, SystemConfig, derive_dims,
                     sample_channel, transmit_power_epa, transmit_power_gsvd, transmit_power_upa)

__version__ = "0.1.0"
