"""Run-loop engine selection: compiled extension with pure-Python fallback.

Set ``SATRL_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
the engine-equivalence tests).
"""

import os

from . import _pyloop

if os.environ.get("SATRL_PURE_PYTHON"):
    _engine = _pyloop
    ENGINE_NAME = "python"
else:
    try:
        from . import _core as _engine  # type: ignore[attr-defined]

        ENGINE_NAME = "compiled"
    except ImportError:
        _engine = _pyloop
        ENGINE_NAME = "python"

run_loop = _engine.run_loop


def get_engine(name: str):
    """Engine module by name ('compiled' or 'python'); raises if unavailable."""
    if name == "python":
        return _pyloop
    if name == "compiled":
        from . import _core  # noqa: F811

        return _core
    raise ValueError(f"unknown engine {name!r}")
