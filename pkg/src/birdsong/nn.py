"""Dense softmax classifier: forward/backward passes, Adam, persistence.

The default architecture is 80 -> 256 -> 256 -> 256 -> 5 with ReLU
hidden activations, 50% inverted dropout after each hidden layer during
training, and a softmax output trained with categorical cross-entropy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODEL_FORMAT_VERSION = 1
PROB_FLOOR = 1e-12


class ModelFileError(ValueError):
    """Model file cannot be parsed into a network."""


class ModelVersionError(ModelFileError):
    """Model file was written by an incompatible format version."""


class ModelShapeError(ModelFileError):
    """Stored arrays disagree with the declared layer sizes."""


@dataclass(frozen=True)
class ModelConfig:
    layer_sizes: tuple[int, ...] = (80, 256, 256, 256, 5)
    dropout_rate: float = 0.5
    hidden_activation: str = "relu"
    output_activation: str = "softmax"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)


@dataclass
class Network:
    layers: list[DenseLayer]
    config: ModelConfig
    labels: tuple[str, ...] | None = None


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def build_network(
    config: ModelConfig | None = None,
    seed: int | np.random.Generator | None = 0,
    labels: tuple[str, ...] | None = None,
) -> Network:
    """Glorot-uniform weights, zero biases."""
    if config is None:
        config = ModelConfig()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        layers.append(
            DenseLayer(
                weights=rng.uniform(-limit, limit, size=(n_out, n_in)),
                bias=np.zeros(n_out),
            )
        )
    if labels is not None and len(labels) != config.layer_sizes[-1]:
        raise ValueError("label count must equal the output layer size")
    return Network(layers=layers, config=config, labels=labels)


def parameter_counts(net: Network) -> list[int]:
    return [l.weights.size + l.bias.size for l in net.layers]


def parameter_count(net: Network) -> int:
    return sum(parameter_counts(net))


def network_params(net: Network) -> list[np.ndarray]:
    """Flat parameter list [W1, b1, W2, b2, ...] (views, not copies)."""
    params: list[np.ndarray] = []
    for layer in net.layers:
        params.append(layer.weights)
        params.append(layer.bias)
    return params


def relu(x):
    """max(0, x), elementwise."""
    return np.maximum(x, 0.0)


def softmax(logits) -> np.ndarray:
    """Shift-invariant softmax along the last axis."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot softmax an empty sequence")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: Network, x, mode: str = "infer", rng: np.random.Generator | None = None):
    """Run the network on a feature vector or a (batch, n_in) matrix.

    In "infer" mode returns class probabilities; deterministic. In
    "train" mode dropout is active (kept units scaled by 1/(1 - rate))
    and the return value is (probs, cache) for the backward pass.
    """
    if mode not in ("infer", "train"):
        raise ValueError(f"mode must be 'infer' or 'train', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[np.newaxis, :] if single else x
    n_in = net.config.layer_sizes[0]
    if h.ndim != 2 or h.shape[1] != n_in:
        raise ValueError(f"input width {h.shape[-1]} does not match model input {n_in}")

    train = mode == "train"
    rate = net.config.dropout_rate
    if train and rate > 0 and rng is None:
        raise ValueError("train mode with dropout needs a random generator")

    inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    for layer in net.layers[:-1]:
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        pre_acts.append(z)
        h = relu(z)
        if train and rate > 0:
            mask = rng.random(h.shape) >= rate
            h = h * mask / (1.0 - rate)
            masks.append(mask)
        else:
            masks.append(None)
    inputs.append(h)
    logits = h @ net.layers[-1].weights.T + net.layers[-1].bias
    probs = softmax(logits)

    if not train:
        return probs[0] if single else probs
    cache = {
        "inputs": inputs,
        "pre_acts": pre_acts,
        "masks": masks,
        "probs": probs,
        "single": single,
    }
    return (probs[0] if single else probs), cache


def cross_entropy(probs, target) -> float:
    """-ln p(target class), with probabilities floored at 1e-12.

    Batched inputs return the mean loss over rows.
    """
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: probs {p.shape} vs target {t.shape}")
    clipped = np.clip(p, PROB_FLOOR, 1.0)
    per_sample = -(t * np.log(clipped)).sum(axis=-1)
    return float(per_sample.mean())


def backward(net: Network, cache: dict, target) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the mean cross-entropy w.r.t. every weight and bias.

    Requires the cache from a train-mode forward pass; dropout masks are
    reused so the gradient matches the sampled subnetwork exactly.
    """
    if not cache or "probs" not in cache:
        raise ValueError("missing forward cache; run forward in train mode first")
    t = np.asarray(target, dtype=np.float64)
    if t.ndim == 1:
        t = t[np.newaxis, :]
    probs = cache["probs"]
    if probs.shape != t.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs target {t.shape}")
    batch = probs.shape[0]
    rate = net.config.dropout_rate

    # softmax + cross-entropy collapses to probs - target at the logits
    delta = (probs - t) / batch
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    out_layer = net.layers[-1]
    grads[-1] = (delta.T @ cache["inputs"][-1], delta.sum(axis=0))
    upstream = delta @ out_layer.weights

    for i in range(len(net.layers) - 2, -1, -1):
        mask = cache["masks"][i]
        if mask is not None:
            upstream = upstream * mask / (1.0 - rate)
        upstream = upstream * (cache["pre_acts"][i] > 0)
        grads[i] = (upstream.T @ cache["inputs"][i], upstream.sum(axis=0))
        if i > 0:
            upstream = upstream @ net.layers[i].weights
    return grads


def flatten_grads(grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
    flat: list[np.ndarray] = []
    for dw, db in grads:
        flat.append(dw)
        flat.append(db)
    return flat


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; params are modified in place."""
    if len(params) != len(grads):
        raise ValueError("params and grads must pair up")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    b1_corr = 1.0 - b1**state.t
    b2_corr = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / b1_corr
        v_hat = v / b2_corr
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def save_model(net: Network, path) -> None:
    """Write the network as versioned JSON with full float precision."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(net.config.layer_sizes),
        "hidden_activation": net.config.hidden_activation,
        "output_activation": net.config.output_activation,
        "dropout_rate": net.config.dropout_rate,
        "labels": list(net.labels) if net.labels is not None else None,
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> Network:
    """Read a model written by save_model; round trip is exact."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError("corrupt model file: top level is not an object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {version!r} unsupported (expected {MODEL_FORMAT_VERSION})"
        )
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        config = ModelConfig(
            layer_sizes=sizes,
            dropout_rate=float(doc["dropout_rate"]),
            hidden_activation=str(doc["hidden_activation"]),
            output_activation=str(doc["output_activation"]),
        )
        raw_layers = doc["layers"]
        raw_labels = doc.get("labels")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from exc

    if len(raw_layers) != len(sizes) - 1:
        raise ModelShapeError(
            f"expected {len(sizes) - 1} layers, file holds {len(raw_layers)}"
        )
    layers = []
    for i, (entry, n_in, n_out) in enumerate(zip(raw_layers, sizes[:-1], sizes[1:])):
        try:
            weights = np.asarray(entry["weights"], dtype=np.float64)
            bias = np.asarray(entry["bias"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelShapeError(f"layer {i}: ragged or missing arrays ({exc})") from exc
        if weights.shape != (n_out, n_in):
            raise ModelShapeError(
                f"layer {i}: weights {weights.shape} do not match ({n_out}, {n_in})"
            )
        if bias.shape != (n_out,):
            raise ModelShapeError(f"layer {i}: bias {bias.shape} does not match ({n_out},)")
        layers.append(DenseLayer(weights=weights, bias=bias))

    labels = tuple(str(l) for l in raw_labels) if raw_labels is not None else None
    if labels is not None and len(labels) != sizes[-1]:
        raise ModelShapeError("label count does not match the output layer size")
    return Network(layers=layers, config=config, labels=labels)


def model_fingerprint(net: Network) -> str:
    """Short content hash identifying the parameters and labels."""
    h = hashlib.sha256()
    h.update(repr(net.config.layer_sizes).encode())
    h.update(repr(net.labels).encode())
    for layer in net.layers:
        h.update(np.ascontiguousarray(layer.weights, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(layer.bias, dtype=np.float64).tobytes())
    return h.hexdigest()[:12]
