from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        self.param_name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


@dataclass
class AdamWState:
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class AdamW:
    """AdamW with bias-corrected moments and decoupled weight decay.

    ``params`` is a name -> Tensor mapping; :meth:`step` takes gradients keyed
    either by name or by the tensor object itself (as returned by a tape).
    """

    def __init__(self, params: dict[str, Tensor], lr: float, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = dict(params)
        self.state = AdamWState(lr=lr, weight_decay=weight_decay, beta1=betas[0], beta2=betas[1], eps=eps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def step(self, grads: dict) -> None:
        st = self.state
        resolved = {}
        for name, p in self.params.items():
            g = grads.get(p)
            if g is None:
                g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            resolved[name] = g
        st.t += 1
        c1 = 1.0 - st.beta1 ** st.t
        c2 = 1.0 - st.beta2 ** st.t
        for name, p in self.params.items():
            g = resolved[name]
            m = st.m[name]
            v = st.v[name]
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * (g * g)
            m_hat = m / c1
            v_hat = v / c2
            p.data = (p.data * (1.0 - st.lr * st.weight_decay) - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)).astype(p.dtype, copy=False)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"m/{name}"] = self.state.m[name]
            out[f"v/{name}"] = self.state.v[name]
        return out

    def hyperparameters(self) -> dict:
        st = self.state
        return {"lr": st.lr, "weight_decay": st.weight_decay, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps, "t": st.t}

    def load_state(self, hyper: dict, arrays: dict[str, np.ndarray]) -> None:
        st = self.state
        st.t = int(hyper.get("t", 0))
        for name in self.params:
            st.m[name] = np.array(arrays[f"m/{name}"], dtype=self.params[name].dtype)
            st.v[name] = np.array(arrays[f"v/{name}"], dtype=self.params[name].dtype)


def adamw_step(params: dict[str, Tensor], grads: dict, state: AdamWState) -> dict[str, Tensor]:
    """Functional form over an explicit state; mutates and returns ``params``."""
    opt = AdamW.__new__(AdamW)
    opt.params = params
    opt.state = state
    for name, p in params.items():
        state.m.setdefault(name, np.zeros_like(p.data))
        state.v.setdefault(name, np.zeros_like(p.data))
        if state.m[name].shape != p.shape:
            raise ValueError(f"adamw_step: state shape {state.m[name].shape} != param {p.shape} for {name!r}")
    opt.step(grads)
    return params
