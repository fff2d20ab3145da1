"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from the ``SPARSECG_NUMBA``
environment variable: ``0``/``false``/``off`` forces numpy; anything else uses
numba when it is importable. Both backends expose the same functions and are
interchangeable up to floating-point summation order.
"""

import os
from types import ModuleType

from . import _numpy
from ._numpy import (  # noqa: F401
    KIND_DELTA_MAX,
    KIND_DELTA_VAR,
    KIND_MASK,
    KIND_QVAR,
    LOSS_ABS_DELTA,
    LOSS_DELTA_VAR,
    LOSS_QVAR,
    STATUS_NONFINITE,
    STATUS_OK,
)

_FUNCS = ("zeta_pairs", "select_mask", "q_value", "max_sum", "gather", "topology", "act", "td_targets", "td_batch")


def _numba_wanted() -> bool:
    return os.environ.get("SPARSECG_NUMBA", "1").strip().lower() not in {"0", "false", "off", "no"}


def get_backend(name: str) -> ModuleType:
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def _pick() -> tuple[str, ModuleType]:
    if _numba_wanted():
        try:
            return "numba", get_backend("numba")
        except ImportError:
            pass
    return "numpy", _numpy


BACKEND, _impl = _pick()

zeta_pairs = _impl.zeta_pairs
select_mask = _impl.select_mask
q_value = _impl.q_value
max_sum = _impl.max_sum
gather = _impl.gather
topology = _impl.topology
act = _impl.act
td_targets = _impl.td_targets
td_batch = _impl.td_batch
