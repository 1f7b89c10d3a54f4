"""Kernel backend selection: compiled extension with pure NumPy fallback.

The compiled core (``_core``, built from Cython) is preferred when present;
otherwise the pure implementations in ``_pure`` are used.  Selection happens
at import and can be forced with the environment variable
``SPIKEDRIVE_BACKEND=pure|compiled|auto`` or switched at runtime with
:func:`set_backend` (both backends are bit-identical by contract).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import _pure

_BACKENDS = {"pure": _pure}
try:
    from . import _core  # type: ignore[attr-defined]

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None


def _initial_backend() -> str:
    choice = os.environ.get("SPIKEDRIVE_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "compiled" if "compiled" in _BACKENDS else "pure"
    if choice not in _BACKENDS:
        raise ImportError(
            f"SPIKEDRIVE_BACKEND={choice!r} is not available; "
            f"choices: {sorted(_BACKENDS)} or 'auto'"
        )
    return choice


_active_name = _initial_backend()
_active = _BACKENDS[_active_name]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def has_compiled() -> bool:
    return "compiled" in _BACKENDS


def active_backend() -> str:
    return _active_name


def set_backend(name: str) -> None:
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}")
    _active_name = name
    _active = _BACKENDS[name]


@contextmanager
def use_backend(name: str):
    prev = active_backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def intersect_count(a, b):
    return _active.intersect_count(a, b)


def sdsa_mask_bits(q_indptr, q_pos, k_indptr, k_pos, threshold):
    return _active.sdsa_mask_bits(q_indptr, q_pos, k_indptr, k_pos, threshold)


def maxpool_segments(indptr, pos, in_h, in_w, kernel_h, kernel_w,
                     stride_h, stride_w, out_h, out_w):
    return _active.maxpool_segments(indptr, pos, in_h, in_w, kernel_h, kernel_w,
                                    stride_h, stride_w, out_h, out_w)


def linear_accumulate(indptr, pos, weights, acc):
    return _active.linear_accumulate(indptr, pos, weights, acc)


def lif_encode(spa, gamma_num, gamma_shift, v_th, v_reset, mem_min, mem_max,
               temp_init):
    return _active.lif_encode(spa, gamma_num, gamma_shift, v_th, v_reset,
                              mem_min, mem_max, temp_init)
