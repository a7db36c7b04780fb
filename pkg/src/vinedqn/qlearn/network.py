"""Feed-forward action-value network with hand-written backpropagation."""

from __future__ import annotations

import numpy as np

__all__ = ["ACTIVATIONS", "QNetwork", "Adam", "SGD", "make_optimizer"]


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0.0).astype(z.dtype)


def _tanh_grad(z):
    return 1.0 - np.tanh(z) ** 2


def _identity(z):
    return z


def _ones(z):
    return np.ones_like(z)


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "linear": (_identity, _ones),
}


class QNetwork:
    """Multi-layer perceptron mapping a batch of inputs to action values.

    Parameters
    ----------
    layer_sizes : sequence of int
        Widths including input and output, e.g. ``(9, 64, 64, 6)``.
    activations : sequence of str, optional
        One name per weight layer. Defaults to ReLU hidden layers and a
        linear output.
    rng : numpy.random.Generator, optional
        Initialization source. Without it all parameters start at zero.
    bias : bool
        Whether layers carry bias vectors.
    """

    def __init__(self, layer_sizes, activations=None, rng=None, bias=True):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output size")
        n_layers = len(self.layer_sizes) - 1
        if activations is None:
            activations = ["relu"] * (n_layers - 1) + ["linear"]
        self.activations = tuple(activations)
        if len(self.activations) != n_layers:
            raise ValueError("one activation per weight layer required")
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")
        self.bias = bias
        shapes = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            shapes.append((fan_in, fan_out))
            if bias:
                shapes.append((fan_out,))
        self._shapes = shapes
        self._slices, offset = [], 0
        for sh in shapes:
            size = int(np.prod(sh))
            self._slices.append((offset, offset + size, sh))
            offset += size
        # all parameters live in one flat buffer so optimizers update it in one pass
        self.flat = np.zeros(offset)
        self._bind()
        if rng is not None:
            for w, fan_in in zip(self.weights, self.layer_sizes[:-1]):
                limit = np.sqrt(6.0 / fan_in)
                w[...] = rng.uniform(-limit, limit, size=w.shape)
            # small output layer keeps the initial action values near zero
            self.weights[-1] *= 0.1

    def _views(self, buffer):
        return [buffer[lo:hi].reshape(sh) for lo, hi, sh in self._slices]

    def _bind(self):
        views = self._views(self.flat)
        step = 2 if self.bias else 1
        self.weights = views[::step]
        self.biases = views[1::2] if self.bias else [None] * len(self.weights)

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Views into :attr:`flat`: weights and biases interleaved per layer."""
        return self._views(self.flat)

    def copy(self) -> "QNetwork":
        other = QNetwork(self.layer_sizes, self.activations, bias=self.bias)
        other.flat[:] = self.flat
        return other

    def forward(self, x, cache=False):
        """Action values for ``x`` of shape ``(batch, n_in)`` or ``(n_in,)``."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite network input")
        single = x.ndim == 1
        a = x[None, :] if single else x
        memory = [a]
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w
            if b is not None:
                z = z + b
            a = ACTIVATIONS[name][0](z)
            memory.append(z)
            memory.append(a)
        out = a[0] if single else a
        return (out, memory) if cache else out

    __call__ = forward

    def backward(self, memory, d_out, flat=False):
        """Gradients of ``sum(d_out * output)`` w.r.t. the parameters.

        Returned in the same order as :meth:`parameters`, or as one vector
        laid out like :attr:`flat` when ``flat`` is true.
        """
        grad = np.empty_like(self.flat)
        views = self._views(grad)
        step = 2 if self.bias else 1
        delta = d_out
        for layer in reversed(range(len(self.weights))):
            z = memory[2 * layer + 1]
            a_prev = memory[2 * layer]
            if self.activations[layer] == "relu":
                delta = np.where(z > 0.0, delta, 0.0)
            else:
                delta = delta * ACTIVATIONS[self.activations[layer]][1](z)
            np.matmul(a_prev.T, delta, out=views[step * layer])
            if self.bias:
                delta.sum(axis=0, out=views[2 * layer + 1])
            if layer:
                delta = delta @ self.weights[layer].T
        return grad if flat else views


class SGD:
    def __init__(self, params, lr):
        self.params = params
        self.lr = lr

    def step(self, grads):
        if isinstance(self.params, np.ndarray):
            self.params -= self.lr * grads
            return
        for p, g in zip(self.params, grads):
            p -= self.lr * g


class Adam:
    """Adaptive-moment optimizer updating parameters in place.

    ``params`` is either a single array (e.g. :attr:`QNetwork.flat`) or a
    list of arrays; ``grads`` passed to :meth:`step` must match.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        single = isinstance(params, np.ndarray)
        self.m = np.zeros_like(params) if single else [np.zeros_like(p) for p in params]
        self.v = np.zeros_like(params) if single else [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        if isinstance(self.params, np.ndarray):
            triples = [(self.params, grads, self.m, self.v)]
        else:
            triples = zip(self.params, grads, self.m, self.v)
        for p, g, m, v in triples:
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= scale * m / (np.sqrt(v) + self.eps)


def make_optimizer(kind: str, params, lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
