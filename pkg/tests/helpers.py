"""Shared test utilities: the finite-difference gradient oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np

from framemet.autodiff import Tensor, no_grad

FD_EPS = 1e-5
REL_TOL = 1e-4
# floor for comparisons around zero, where central differences only carry
# float64 cancellation noise (~1e-11 at unit-scale losses)
ABS_FLOOR = 1e-9


def numerical_grad(f: Callable[[], float], param: Tensor,
                   eps: float = FD_EPS) -> np.ndarray:
    """Central finite differences of a scalar function wrt one parameter."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            out[i] = (up - down) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR / REL_TOL)
    return float(np.max(np.abs(analytic - numeric) / scale, initial=0.0))


def assert_grad_matches(analytic: np.ndarray, numeric: np.ndarray,
                        rtol: float = REL_TOL, context: str = "") -> None:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR / rtol)
    err = np.abs(analytic - numeric) / scale
    worst = np.unravel_index(np.argmax(err), err.shape) if err.size else ()
    assert np.all(err <= rtol), (
        f"{context} gradient mismatch at {worst}: analytic "
        f"{analytic[worst]!r}, numeric {numeric[worst]!r}, "
        f"rel err {err[worst]:.3e}"
    )


def check_gradients(build_loss: Callable[[], "Tensor"],
                    params: dict[str, Tensor], rtol: float = REL_TOL) -> None:
    """Compare tape gradients of a fresh forward pass against the FD oracle."""
    loss = build_loss()
    loss.backward()
    for name, p in params.items():
        analytic = p.grad.copy()
        p.grad[...] = 0.0
        numeric = numerical_grad(lambda: build_loss().item(), p)
        assert_grad_matches(analytic, numeric, rtol=rtol, context=name)
