"""Layer stacks, losses, gradient checking and model documents."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from itertools import count

import numpy as np

from .layers import LSTM, WEIGHT_NAMES, Dense

FORMAT_VERSION = 1
PROB_FLOOR = 1e-12

_cache_ids = count()
_PLACEHOLDER = re.compile(r'"(@@\d+@@)"')


class CacheMismatchError(ValueError):
    """Backward was handed a cache that does not belong to this network state."""


@dataclass
class ForwardCache:
    network_id: int
    version: int
    layer_caches: list
    dropout_masks: list
    last_step: int | None  # sequence length when only the last step was kept
    input_shape: tuple
    mode: str


class Network:
    """Ordered stack of LSTM layers followed by dense layers.

    Parameters
    ----------
    layers : list
        ``LSTM`` layers first (possibly none), then ``Dense`` layers.
    head : {"regression", "classification"}
        Regression heads must end in an identity dense layer, classification
        heads in a softmax dense layer.
    sequence : {"per_step", "last_step"}
        For recurrent stacks, whether the dense layers see every time step or
        only the final hidden state. Ignored for dense-only networks.
    dropout_keep : float
        Keep probability for inverted dropout on the output of every hidden
        layer, applied in ``train`` mode only. Recurrent state is never dropped.
    """

    def __init__(self, layers, head="regression", sequence="last_step", dropout_keep=1.0):
        if not layers:
            raise ValueError("a network needs at least one layer")
        if head not in ("regression", "classification"):
            raise ValueError(f"unknown head {head!r}")
        if sequence not in ("per_step", "last_step"):
            raise ValueError(f"unknown sequence handling {sequence!r}")
        if not 0.0 < dropout_keep <= 1.0:
            raise ValueError("dropout_keep must be in (0, 1]")
        seen_dense = False
        for prev, nxt in zip(layers, layers[1:]):
            if prev.n_output != nxt.n_in:
                raise ValueError(
                    f"layer width mismatch: {prev.n_output} feeds {nxt.n_in}")
        for layer in layers:
            if isinstance(layer, Dense):
                seen_dense = True
            elif seen_dense:
                raise ValueError("LSTM layers must precede dense layers")
        last = layers[-1]
        if not isinstance(last, Dense):
            raise ValueError("the final layer must be dense")
        if head == "classification" and last.activation != "softmax":
            raise ValueError("classification head must end in softmax")
        if head == "regression" and last.activation != "identity":
            raise ValueError("regression head must end in identity")
        for layer in layers[:-1]:
            if isinstance(layer, Dense) and layer.activation == "softmax":
                raise ValueError("softmax is only allowed on the final layer")
        self.layers = list(layers)
        self.head = head
        self.sequence = sequence
        self.dropout_keep = float(dropout_keep)
        self.id = next(_cache_ids)
        self.version = 0

    # ------------------------------------------------------------------
    @property
    def n_input(self):
        return self.layers[0].n_in

    @property
    def recurrent(self):
        return isinstance(self.layers[0], LSTM)

    @property
    def params(self):
        return [layer.params for layer in self.layers]

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield f"{i}.{name}", value

    def n_params(self):
        return sum(v.size for _, v in self.named_params())

    def set_params(self, params):
        """Replace parameters with copies of ``params`` (list of dicts)."""
        if len(params) != len(self.layers):
            raise ValueError("parameter list does not match layer count")
        for layer, p in zip(self.layers, params):
            for name, old in layer.params.items():
                new = np.array(p[name], dtype=np.float64)
                if new.shape != old.shape:
                    raise ValueError(f"shape mismatch for {name}: {new.shape} vs {old.shape}")
                layer.params[name] = new
        self.version += 1

    def touch(self):
        """Mark parameters as modified in place; invalidates older caches."""
        self.version += 1

    # ------------------------------------------------------------------
    def forward(self, x, mode="infer", rng=None):
        """Run the stack; returns ``(output, cache)``.

        ``x`` is ``(batch, time, features)`` for recurrent networks and
        ``(batch, features)`` for dense-only ones. ``rng`` (a seed or a numpy
        Generator) drives dropout and is required in ``train`` mode when
        ``dropout_keep < 1``.
        """
        if mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_input:
            raise ValueError(f"expected {self.n_input} input features, got {x.shape[-1]}")
        if self.recurrent and x.ndim != 3:
            raise ValueError("recurrent networks take (batch, time, features) input")
        if not self.recurrent and x.ndim != 2:
            raise ValueError("dense networks take (batch, features) input")
        dropping = mode == "train" and self.dropout_keep < 1.0
        if dropping:
            if rng is None:
                raise ValueError("train mode with dropout needs an rng seed")
            rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng

        caches, masks = [], []
        last_step = None
        h = x
        for i, layer in enumerate(self.layers):
            h, c = layer.forward(h)
            caches.append(c)
            is_last_layer = i == len(self.layers) - 1
            if (isinstance(layer, LSTM) and self.sequence == "last_step"
                    and not isinstance(self.layers[i + 1], LSTM)):
                last_step = h.shape[1]
                h = h[:, -1, :]
            mask = None
            if dropping and not is_last_layer:
                keep = self.dropout_keep
                mask = (rng.random(h.shape) < keep) / keep
                h = h * mask
            masks.append(mask)
        cache = ForwardCache(self.id, self.version, caches, masks, last_step, x.shape, mode)
        return h, cache

    def predict(self, x):
        return self.forward(x, mode="infer")[0]

    def backward(self, cache, grad_output, l2=0.0):
        """Gradients of the loss w.r.t. every parameter.

        ``grad_output`` is dLoss/dOutput. The L2 penalty ``l2 * W`` is added
        to every weight matrix, never to biases. Returns a list of dicts
        mirroring ``params``.
        """
        if not isinstance(cache, ForwardCache):
            raise CacheMismatchError("backward needs the cache returned by forward")
        if cache.network_id != self.id or cache.version != self.version:
            raise CacheMismatchError("cache is stale or belongs to another network")
        grads = [None] * len(self.layers)
        d = np.asarray(grad_output, dtype=np.float64)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if cache.dropout_masks[i] is not None:
                d = d * cache.dropout_masks[i]
            if (isinstance(layer, LSTM) and self.sequence == "last_step"
                    and not isinstance(self.layers[i + 1], LSTM)):
                full = np.zeros((d.shape[0], cache.last_step, d.shape[-1]))
                full[:, -1, :] = d
                d = full
            d, g = layer.backward(d, cache.layer_caches[i])
            if l2:
                for name in g:
                    if name in WEIGHT_NAMES:
                        g[name] = g[name] + l2 * layer.params[name]
            grads[i] = g
        return grads

    # ------------------------------------------------------------------
    def spec(self):
        return {
            "head": self.head,
            "sequence": self.sequence,
            "dropout_keep": self.dropout_keep,
            "layers": [layer.config() for layer in self.layers],
        }

    def copy(self):
        clone = network_from_spec(self.spec())
        clone.set_params(self.params)
        return clone


def build_network(spec, seed=0):
    """Build a freshly initialised network from a spec dict."""
    return network_from_spec(spec, np.random.default_rng(seed))


def network_from_spec(spec, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    layers = []
    for cfg in spec["layers"]:
        if cfg["type"] == "lstm":
            layers.append(LSTM(cfg["n_in"], cfg["n_hidden"], rng=rng))
        elif cfg["type"] == "dense":
            layers.append(Dense(cfg["n_in"], cfg["n_out"], cfg.get("activation", "identity"), rng=rng))
        else:
            raise ValueError(f"unknown layer type {cfg['type']!r}")
    return Network(layers, head=spec["head"], sequence=spec.get("sequence", "last_step"),
                   dropout_keep=spec.get("dropout_keep", 1.0))


def stack_spec(n_input, hidden, n_output, *, lstm_layers=0, activation="tanh",
               head="regression", sequence="last_step", dropout_keep=1.0):
    """Spec for ``lstm_layers`` LSTM layers then dense hidden layers.

    The first ``lstm_layers`` sizes in ``hidden`` become LSTM widths, the
    rest dense widths with ``activation``.
    """
    layers, width = [], n_input
    for k, size in enumerate(hidden):
        if k < lstm_layers:
            layers.append({"type": "lstm", "n_in": width, "n_hidden": size})
        else:
            layers.append({"type": "dense", "n_in": width, "n_out": size, "activation": activation})
        width = size
    final = "softmax" if head == "classification" else "identity"
    layers.append({"type": "dense", "n_in": width, "n_out": n_output, "activation": final})
    return {"head": head, "sequence": sequence, "dropout_keep": dropout_keep, "layers": layers}


# ----------------------------------------------------------------------
# losses
# ----------------------------------------------------------------------

def loss(kind, prediction, target):
    """Return ``(value, dvalue/dprediction)``.

    ``cross_entropy`` takes softmax probabilities and either one-hot targets
    of the same shape or integer class indices; the value is averaged over
    samples and probabilities are floored at 1e-12 before the log. ``mse``
    averages the squared difference over every element.
    """
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target)
    if kind == "mse":
        target = target.astype(np.float64)
        if target.shape != prediction.shape:
            raise ValueError(f"shape mismatch: {prediction.shape} vs {target.shape}")
        diff = prediction - target
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    if kind == "cross_entropy":
        if target.shape == prediction.shape[:-1] and np.issubdtype(target.dtype, np.integer):
            onehot = np.zeros_like(prediction)
            np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
            target = onehot
        target = target.astype(np.float64)
        if target.shape != prediction.shape:
            raise ValueError(f"shape mismatch: {prediction.shape} vs {target.shape}")
        n = int(np.prod(prediction.shape[:-1])) or 1
        p = np.maximum(prediction, PROB_FLOOR)
        value = -float(np.sum(target * np.log(p))) / n
        grad = np.where(prediction >= PROB_FLOOR, -target / p, 0.0) / n
        return value, grad
    raise ValueError(f"unknown loss {kind!r}")


# ----------------------------------------------------------------------
# gradient check
# ----------------------------------------------------------------------

def grad_check(net, x, target, loss_kind="mse", h=1e-5, l2=0.0, seed=0, denom_floor=1e-12):
    """Largest relative error between backward and central differences.

    Dropout masks are regenerated from ``seed`` for every evaluation so the
    function being differentiated stays fixed. Entries where both gradients
    are below ``denom_floor`` in magnitude are skipped.
    """
    def objective():
        out, _ = net.forward(x, mode="train", rng=seed)
        value, _ = loss(loss_kind, out, target)
        penalty = 0.5 * l2 * sum(
            float(np.sum(v * v)) for k, v in net.named_params() if k.split(".")[1] in WEIGHT_NAMES)
        return value + penalty

    out, cache = net.forward(x, mode="train", rng=seed)
    _, dout = loss(loss_kind, out, target)
    analytic = net.backward(cache, dout, l2=l2)

    worst = 0.0
    for li, layer in enumerate(net.layers):
        for name, param in layer.params.items():
            g = analytic[li][name]
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                plus = objective()
                param[idx] = orig - h
                minus = objective()
                param[idx] = orig
                numeric = (plus - minus) / (2.0 * h)
                denom = max(abs(numeric), abs(g[idx]))
                if denom > denom_floor:
                    worst = max(worst, abs(numeric - g[idx]) / denom)
    return worst


# ----------------------------------------------------------------------
# model documents
# ----------------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def encode_array(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def decode_array(d):
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def dumps(document):
    """Serialise a JSON-able document, writing every float with 17 significant digits.

    Arrays should be pre-encoded with :func:`encode_array`. Output is
    deterministic (sorted keys, fixed indentation).
    """
    placeholders = {}

    def swap(obj):
        if isinstance(obj, dict):
            if set(obj) == {"shape", "data"}:
                key = f"@@{len(placeholders)}@@"
                placeholders[key] = "[" + ", ".join(_fmt(v) for v in obj["data"]) + "]"
                return {"shape": obj["shape"], "data": key}
            return {k: swap(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [swap(v) for v in obj]
        if isinstance(obj, float):
            key = f"@@{len(placeholders)}@@"
            placeholders[key] = _fmt(obj)
            return key
        if isinstance(obj, np.generic):
            return swap(obj.item())
        return obj

    text = json.dumps(swap(document), indent=1, sort_keys=True)
    text = _PLACEHOLDER.sub(lambda m: placeholders[m.group(1)], text)
    return text + "\n"


def network_to_dict(net):
    return {
        "spec": net.spec(),
        "params": [{k: encode_array(v) for k, v in layer.params.items()} for layer in net.layers],
    }


def network_from_dict(d):
    net = network_from_spec(d["spec"])
    net.set_params([{k: decode_array(v) for k, v in p.items()} for p in d["params"]])
    return net


def save_network(net, path, training=None):
    doc = {"format": "edgelgnb.network", "version": FORMAT_VERSION, "network": network_to_dict(net)}
    if training is not None:
        doc["training"] = training
    with open(path, "w") as fh:
        fh.write(dumps(doc))


def load_network(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "edgelgnb.network":
        raise ValueError(f"{path}: not a network document")
    return network_from_dict(doc["network"])
