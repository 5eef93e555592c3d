"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .autograd import Tape, Tensor


def _kink_signature(tape: Tape) -> list:
    return [n.saved["pre"] > 0 for n in tape.nodes if n.kind == "relu"]


def _same_kinks(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    a = np.linalg.norm(analytic)
    n = np.linalg.norm(numeric)
    if a < floor and n < floor:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / (a + n))


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-3,
    max_entries: Optional[int] = 32,
    seed: int = 0,
    order: int = 4,
) -> dict[str, float]:
    """Compare tape gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must be deterministic (re-seed any dropout stream inside it).
    For tensors larger than ``max_entries`` a random subset of entries is
    checked. Entries whose perturbation flips a ReLU gate are resampled,
    since a difference quotient across a kink is not a derivative.
    ``order=4`` uses the five-point central stencil (truncation O(h^4));
    ``order=2`` the plain two-point one.
    Returns the per-parameter relative error ``|a-n| / (|a|+|n|)``.
    """
    with Tape() as tape:
        loss = loss_fn()
    grads = tape.backward(loss, wrt=params.values())
    base_kinks = _kink_signature(tape)
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    steps = (1, -1) if order == 2 else (1, -1, 2, -2)
    rng = np.random.default_rng(seed)
    errors = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        candidates = rng.permutation(flat.size)
        want = flat.size if max_entries is None else min(max_entries, flat.size)
        analytic, numeric = [], []
        for idx in candidates:
            if len(analytic) >= want:
                break
            orig = flat[idx]
            vals = {}
            clean = True
            for step in steps:
                flat[idx] = orig + step * h
                with Tape() as t2:
                    vals[step] = float(loss_fn().data)
                if not _same_kinks(base_kinks, _kink_signature(t2)):
                    clean = False
                    break
            flat[idx] = orig
            if not clean:
                continue
            if order == 2:
                numeric.append((vals[1] - vals[-1]) / (2 * h))
            else:
                numeric.append((vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h))
            analytic.append(grads[p].reshape(-1)[idx])
        errors[name] = relative_error(np.array(analytic), np.array(numeric))
    return errors
