"""Information flow between a qubit system, its apparatus and the environment.

The modules build on each other:

* ``qmat`` dense matrix kernel (partial trace, spectra, trace norm)
* ``states`` density matrices, Bloch vectors, purifications
* ``channels`` Kraus families (amplitude damping, generalized amplitude
  damping), the master-equation integrator and the divisibility witness
* ``info`` entropies, mutual information, concurrence, accessible information
* ``tripartite`` system-apparatus-environment sweeps and entropy diagrams
* ``nonmarkov`` BLP, LFS and RHP measures
* ``config`` / ``cli`` scenario files and the ``nmflow`` command
"""

__version__ = "0.1.0"

from .channels import AmplitudeDamping, GeneralizedAmplitudeDamping, IdentityFamily
from .info import EntropyDiagram
from .nonmarkov import MeasureReport, SearchConfig, TimeSeries
from .tripartite import SweepResult, sweep, sweep_arrays

__all__ = [
    "AmplitudeDamping",
    "EntropyDiagram",
    "GeneralizedAmplitudeDamping",
    "IdentityFamily",
    "MeasureReport",
    "SearchConfig",
    "SweepResult",
    "TimeSeries",
    "sweep",
    "sweep_arrays",
    "__version__",
]
