"""Dense and LSTM layers with hand-written backward passes.

Everything runs in float64. Each layer keeps its parameters in a plain
``dict`` of arrays so optimisers and serialisers can walk them generically.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("identity", "sigmoid", "tanh", "relu", "softmax")

# Parameter names that receive L2 weight decay. Biases never do.
WEIGHT_NAMES = frozenset({"W", "U"})


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(kind, z):
    if kind == "identity":
        return z
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {kind!r}")


def _activation_backward(kind, z, a, da):
    if kind == "identity":
        return da
    if kind == "sigmoid":
        return da * a * (1.0 - a)
    if kind == "tanh":
        return da * (1.0 - a * a)
    if kind == "relu":
        return da * (z > 0)
    if kind == "softmax":
        return a * (da - (da * a).sum(axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Fully connected layer ``a = act(x @ W.T + b)``.

    Works on inputs of shape ``(..., n_in)``, so it can be applied per time
    step on a ``(batch, time, n_in)`` tensor.
    """

    kind = "dense"

    def __init__(self, n_in, n_out, activation="identity", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in = int(n_in)
        self.n_out = int(n_out)
        self.activation = activation
        rng = np.random.default_rng(0) if rng is None else rng
        self.params = {
            "W": uniform_init(rng, (self.n_out, self.n_in), self.n_in),
            "b": np.zeros(self.n_out),
        }

    @property
    def n_output(self):
        return self.n_out

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"dense layer expects {self.n_in} inputs, got {x.shape[-1]}")
        z = x @ self.params["W"].T + self.params["b"]
        a = _activate(self.activation, z)
        return a, (x, z, a)

    def backward(self, da, cache):
        x, z, a = cache
        dz = _activation_backward(self.activation, z, a, da)
        dz2 = dz.reshape(-1, self.n_out)
        grads = {
            "W": dz2.T @ x.reshape(-1, self.n_in),
            "b": dz2.sum(axis=0),
        }
        dx = dz @ self.params["W"]
        return dx, grads

    def config(self):
        return {"type": self.kind, "n_in": self.n_in, "n_out": self.n_out,
                "activation": self.activation}


class LSTM:
    """Standard LSTM layer over ``(batch, time, n_in)`` sequences.

    Gates are stacked in the order input, forget, output, candidate: rows
    ``[0:H]`` of ``W``/``U``/``b`` belong to the input gate, ``[H:2H]`` to the
    forget gate, ``[2H:3H]`` to the output gate and ``[3H:4H]`` to the
    candidate. Hidden and cell state start at zero for every sequence. The
    layer returns the full hidden sequence ``(batch, time, H)``.
    """

    kind = "lstm"

    def __init__(self, n_in, n_hidden, rng=None, forget_bias=1.0):
        self.n_in = int(n_in)
        self.n_hidden = int(n_hidden)
        rng = np.random.default_rng(0) if rng is None else rng
        H = self.n_hidden
        fan_in = self.n_in + H
        b = np.zeros(4 * H)
        b[H:2 * H] = forget_bias
        self.params = {
            "W": uniform_init(rng, (4 * H, self.n_in), fan_in),
            "U": uniform_init(rng, (4 * H, H), fan_in),
            "b": b,
        }

    @property
    def n_output(self):
        return self.n_hidden

    def gate(self, name, gate):
        """View of one gate's block, e.g. ``gate("W", "f")``."""
        H = self.n_hidden
        k = "ifog".index(gate)
        return self.params[name][k * H:(k + 1) * H]

    def forward(self, x):
        if x.ndim != 3 or x.shape[-1] != self.n_in:
            raise ValueError(
                f"LSTM expects (batch, time, {self.n_in}) input, got {x.shape}")
        N, T, _ = x.shape
        H = self.n_hidden
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        xw = x @ W.T + b  # input contribution for every step at once
        gates = np.empty((N, T, 4 * H))
        cs = np.empty((N, T, H))
        tcs = np.empty((N, T, H))
        hs = np.empty((N, T, H))
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        for t in range(T):
            z = xw[:, t] + h @ U.T
            g = gates[:, t]
            g[:, :3 * H] = sigmoid(z[:, :3 * H])
            g[:, 3 * H:] = np.tanh(z[:, 3 * H:])
            c = g[:, H:2 * H] * c + g[:, :H] * g[:, 3 * H:]
            tc = np.tanh(c)
            h = g[:, 2 * H:3 * H] * tc
            cs[:, t] = c
            tcs[:, t] = tc
            hs[:, t] = h
        return hs, (x, gates, cs, tcs, hs)

    def backward(self, dhs, cache):
        x, gates, cs, tcs, hs = cache
        N, T, _ = x.shape
        H = self.n_hidden
        U = self.params["U"]
        dz_all = np.empty((N, T, 4 * H))
        dh_next = np.zeros((N, H))
        dc_next = np.zeros((N, H))
        for t in range(T - 1, -1, -1):
            g = gates[:, t]
            i, f, o, cand = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((N, H))
            dh = dhs[:, t] + dh_next
            tc = tcs[:, t]
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dz_all[:, t]
            dz[:, :H] = dc * cand * i * (1.0 - i)
            dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
            dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            dz[:, 3 * H:] = dc * i * (1.0 - cand * cand)
            dc_next = dc * f
            dh_next = dz @ U
        h_prev = np.zeros_like(hs)
        h_prev[:, 1:] = hs[:, :-1]
        flat_dz = dz_all.reshape(-1, 4 * H)
        grads = {
            "W": flat_dz.T @ x.reshape(-1, self.n_in),
            "U": flat_dz.T @ h_prev.reshape(-1, H),
            "b": flat_dz.sum(axis=0),
        }
        dx = dz_all @ self.params["W"]
        return dx, grads

    def config(self):
        return {"type": self.kind, "n_in": self.n_in, "n_hidden": self.n_hidden}
