"""JSON checkpoints of trained agents."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import QNetwork
from .training import DQNAgent

__all__ = ["FORMAT_VERSION", "CheckpointError", "save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, agent: DQNAgent, config: dict | None = None) -> None:
    net = agent.net
    doc = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "activations": list(net.activations),
        "bias": net.bias,
        "weights": [w.tolist() for w in net.weights],
        "biases": [None if b is None else b.tolist() for b in net.biases],
        "normalization": {"scale": agent.scale.tolist()},
        "config": config or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path, expected_layer_sizes=None) -> tuple[DQNAgent, dict]:
    """Read a checkpoint; raises :class:`CheckpointError` on version or shape mismatch."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    sizes = tuple(doc["layer_sizes"])
    if expected_layer_sizes is not None and sizes != tuple(expected_layer_sizes):
        raise CheckpointError(f"layer sizes {sizes} != expected {tuple(expected_layer_sizes)}")
    net = QNetwork(sizes, doc["activations"], bias=doc.get("bias", True))
    if len(doc["weights"]) != len(net.weights) or len(doc["biases"]) != len(net.biases):
        raise CheckpointError("layer count does not match layer_sizes")
    for i, (w, b) in enumerate(zip(doc["weights"], doc["biases"])):
        w = np.asarray(w, dtype=float)
        if w.shape != net.weights[i].shape:
            raise CheckpointError(f"weight {i} has shape {w.shape}, expected {net.weights[i].shape}")
        net.weights[i][...] = w
        if net.bias:
            b = np.asarray(b, dtype=float)
            if b.shape != net.biases[i].shape:
                raise CheckpointError(f"bias {i} has shape {b.shape}, expected {net.biases[i].shape}")
            net.biases[i][...] = b
    scale = np.asarray(doc["normalization"]["scale"], dtype=float)
    if scale.shape != (sizes[0],):
        raise CheckpointError("normalization scale does not match the input size")
    return DQNAgent(net, scale), doc.get("config", {})
