"""spdemil: spectral-Galerkin Milstein simulation for SPDEs with
non-commutative multiplicative trace-class noise.

Subpackages by concern: ``spectral`` (diagonal-generator bookkeeping),
``noise`` (coupled increment tables, counter-based streams), ``iterints``
(Levy-area series and Gaussian-tail engines plus a brute-force oracle),
``operators`` (problem data model and checkers), ``schemes`` (Milstein,
exponential Euler and linear-implicit-Euler steppers), ``costmodel``
(unit-cost accounting, effective orders, scheme selection) and ``harness``
(Monte Carlo experiment orchestration, CSV/JSON emission, CLI in ``cli``).
"""

__version__ = "0.1.0"

from . import costmodel, harness, iterints, noise, operators, schemes, spectral  # noqa: F401
from ._engine import BACKEND as engine_backend  # noqa: F401
