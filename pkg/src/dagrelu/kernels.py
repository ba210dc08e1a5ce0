"""Selects the compiled kernels when the extension is built, else numpy.

``use("python")`` / ``use("compiled")`` switch at runtime, mainly for tests
and the benchmark.
"""
from . import _kernels_py as python_impl

try:
    from . import _kernels as compiled_impl
except ImportError:  # extension not built
    compiled_impl = None

_active = compiled_impl if compiled_impl is not None else python_impl


def available() -> list[str]:
    return ["python"] + (["compiled"] if compiled_impl is not None else [])


def backend() -> str:
    return "compiled" if _active is compiled_impl and compiled_impl is not None else "python"


def use(name: str) -> None:
    global _active
    if name == "python":
        _active = python_impl
    elif name == "compiled":
        if compiled_impl is None:
            raise RuntimeError("compiled kernels are not built")
        _active = compiled_impl
    else:
        raise ValueError(f"unknown kernel backend {name!r}")


def impl():
    return _active
