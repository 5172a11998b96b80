"""Network building blocks on top of the autodiff core.

Modules register parameters by attribute assignment and expose them as a
flat named list in declaration order, which is also the checkpoint
order. Initialization is driven by an explicit numpy Generator so runs
are reproducible from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .value import Value, data_of

LOG_STD_MIN = -10.0
LOG_STD_MAX = 5.0


class Module:
    """Minimal parameter container with recursive named traversal."""

    def __setattr__(self, name, val):
        if isinstance(val, Value):
            self.__dict__.setdefault("_params", {})[name] = val
        elif isinstance(val, Module):
            self.__dict__.setdefault("_children", {})[name] = val
        elif isinstance(val, (list, tuple)) and val and all(isinstance(m, Module) for m in val):
            self.__dict__.setdefault("_children", {})[name] = ModuleList(val)
            object.__setattr__(self, name, val)
            return
        object.__setattr__(self, name, val)

    def named_parameters(self, prefix=""):
        for k, v in self.__dict__.get("_params", {}).items():
            yield (prefix + k, v)
        for k, child in self.__dict__.get("_children", {}).items():
            yield from child.named_parameters(prefix + k + ".")

    def parameters(self):
        return [v for _, v in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_arrays(self):
        """Ordered (name, ndarray) pairs for checkpointing."""
        return [(n, p.data) for n, p in self.named_parameters()]

    def load_state_arrays(self, named):
        table = dict(self.named_parameters())
        for name, arr in named:
            if name not in table:
                raise KeyError(f"unknown parameter {name!r}")
            if table[name].data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name!r}: {table[name].data.shape} vs {arr.shape}")
            table[name].data = np.asarray(arr, dtype=np.float64)


class ModuleList(Module):
    def __init__(self, mods):
        object.__setattr__(self, "_mods", list(mods))
        for i, m in enumerate(mods):
            self.__dict__.setdefault("_children", {})[str(i)] = m

    def __iter__(self):
        return iter(self._mods)

    def __len__(self):
        return len(self._mods)

    def __getitem__(self, i):
        return self._mods[i]


def _uniform(rng, shape, scale):
    return Value(rng.uniform(-scale, scale, size=shape))


class Linear(Module):
    def __init__(self, n_in, n_out, rng, zero=False):
        s = 1.0 / np.sqrt(max(n_in, 1))
        self.w = Value(np.zeros((n_in, n_out))) if zero else _uniform(rng, (n_in, n_out), s)
        self.b = Value(np.zeros(n_out))

    def __call__(self, x):
        return ops.matmul(x, self.w) + self.b


class MLP(Module):
    """Fully connected stack with tanh between layers.

    tanh keeps every path smooth, which the finite-difference gradient
    harness relies on.
    """

    def __init__(self, dims, rng, zero_last=False):
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, zero=(zero_last and i == len(dims) - 2))
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.tanh(x)
        return x


class GRUCell(Module):
    """Gated recurrent unit: h' = z*h + (1-z)*tanh(Wn x + r*(Un h + bn))."""

    def __init__(self, n_in, n_hidden, rng):
        s = 1.0 / np.sqrt(max(n_hidden, 1))
        self.wx = _uniform(rng, (n_in, 3 * n_hidden), s)
        self.wh = _uniform(rng, (n_hidden, 3 * n_hidden), s)
        self.bx = Value(np.zeros(3 * n_hidden))
        self.bh = Value(np.zeros(3 * n_hidden))
        self.n_hidden = n_hidden

    def __call__(self, x, h):
        if not (np.all(np.isfinite(data_of(x))) and np.all(np.isfinite(data_of(h)))):
            raise FloatingPointError("non-finite input to GRU cell")
        gx = ops.matmul(x, self.wx) + self.bx
        gh = ops.matmul(h, self.wh) + self.bh
        return ops.gru_gates(gx, gh, h)


class GRU(Module):
    """Stacked GRU over a step sequence; returns the top layer's final state."""

    def __init__(self, n_in, n_hidden, n_layers, rng):
        self.cells = [GRUCell(n_in if i == 0 else n_hidden, n_hidden, rng) for i in range(n_layers)]
        self.n_hidden = n_hidden

    def __call__(self, steps):
        batch = data_of(steps[0]).shape[0]
        hs = [Value(np.zeros((batch, self.n_hidden))) for _ in self.cells]
        for x in steps:
            inp = x
            for i, cell in enumerate(self.cells):
                hs[i] = cell(inp, hs[i])
                inp = hs[i]
        return hs[-1]


class Conv2d(Module):
    def __init__(self, c_in, c_out, k, rng, stride=1, padding=None, zero=False):
        s = 1.0 / np.sqrt(c_in * k * k)
        self.w = Value(np.zeros((c_out, c_in, k, k))) if zero else _uniform(rng, (c_out, c_in, k, k), s)
        self.b = Value(np.zeros(c_out))
        self.stride = stride
        self.padding = k // 2 if padding is None else padding

    def __call__(self, x):
        return ops.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


# ------------------------------------------------------------------ gaussians


@dataclass
class GaussianParams:
    """Diagonal-Gaussian parameters; log_std is clamped on use so that
    std stays positive and finite."""

    mean: Value
    log_std: Value

    def clamped_log_std(self):
        return ops.clamp(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def std(self):
        return ops.exp(self.clamped_log_std())


def reparam_sample(params: GaussianParams, noise: np.ndarray) -> Value:
    """mean + std * noise; gradient flows to the parameters only."""
    if np.shape(noise) != params.mean.shape:
        raise ValueError(f"noise shape {np.shape(noise)} != mean shape {params.mean.shape}")
    return params.mean + params.std() * np.asarray(noise, dtype=np.float64)


def kl_diag_gaussian(q: GaussianParams, p: GaussianParams) -> Value:
    """KL(q || p) summed over latent dims, averaged over leading rows."""
    if q.mean.shape != p.mean.shape:
        raise ValueError(f"KL shape mismatch: {q.mean.shape} vs {p.mean.shape}")
    lq = q.clamped_log_std()
    lp = p.clamped_log_std()
    if not (np.all(np.isfinite(lq.data)) and np.all(np.isfinite(lp.data))):
        raise FloatingPointError("non-finite log-std in KL")
    var_q = ops.exp(2.0 * lq)
    var_p = ops.exp(2.0 * lp)
    d = q.mean - p.mean
    per = lp - lq + (var_q + d * d) / (2.0 * var_p) - 0.5
    rows = q.mean.shape[0] if q.mean.ndim > 1 else 1
    return per.sum() / float(rows)
