"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it imports; ``CHURNKIT_BACKEND=python``
forces the fallback. Both backends produce bitwise-identical results, so the
choice only affects speed.
"""

import contextlib
import os

from . import _pure

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _pure}
if _core is not None:
    BACKENDS["cython"] = _core

_active = _core if (_core is not None and os.environ.get("CHURNKIT_BACKEND") != "python") else _pure


def backend_name():
    return _active.NAME


def set_backend(name):
    global _active
    try:
        _active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


@contextlib.contextmanager
def use_backend(name):
    prev = _active.NAME
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def gbt_best_split(*args):
    return _active.gbt_best_split(*args)


def gini_best_split(*args):
    return _active.gini_best_split(*args)


def predict_tree(*args):
    return _active.predict_tree(*args)


def interventional_tree_shap(*args):
    return _active.interventional_tree_shap(*args)


shap_weight_table = _pure.shap_weight_table
