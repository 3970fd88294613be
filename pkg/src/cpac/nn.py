"""Dense autoencoder with exact backpropagation, dropout and Adam/RMSProp.

All numerics are float64 so analytic gradients can be checked against
central finite differences at tight tolerances. Everything is seeded and
single-threaded-deterministic: the same seed and config reproduce the
same weights bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

DEFAULT_HIDDEN = (500, 500, 2000, 10)
NET_MAGIC = b"CPACNET1"


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass
class Gradients:
    """Backprop result: one array per weight/bias plus the input gradient."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray


class MlpAutoencoder:
    """Mirrored encoder/decoder MLP.

    ``layer_sizes`` lists the encoder dims, input first and code last;
    the decoder mirrors them back. ReLU follows every layer except the
    final decoder layer, which stays linear so reconstructions can carry
    negative values. Dropout (inverted, so eval mode is the identity) is
    applied after every non-final layer when running in train mode.
    """

    def __init__(self, layer_sizes, dropout_rate: float = 0.2, seed: int = 0):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"layer_sizes must be >= 2 positive ints, got {layer_sizes}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        self.layer_sizes = sizes
        self.dropout_rate = float(dropout_rate)
        rng = substream(seed, "init")
        dims = sizes + sizes[-2::-1]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    @property
    def dim_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def dim_z(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_encoder_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        """Flat parameter list: all weights then all biases."""
        return self.weights + self.biases

    def copy(self) -> "MlpAutoencoder":
        dup = MlpAutoencoder(self.layer_sizes, self.dropout_rate)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    # -- forward ---------------------------------------------------------

    def _run_layers(self, x, start, stop, train, rng, cache=None):
        a = x
        for l in range(start, stop):
            h = a @ self.weights[l] + self.biases[l]
            last = l == self.n_layers - 1
            act = h if last else relu(h)
            mask = None
            if train and self.dropout_rate > 0.0 and not last:
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                keep = 1.0 - self.dropout_rate
                mask = (rng.random(act.shape) < keep) / keep
                act = act * mask
            if cache is not None:
                cache.append((a, h, mask, last))
            a = act
        return a

    def encode(self, batch, train: bool = False, rng=None) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dim_in:
            raise ValueError(f"expected batch of shape (n, {self.dim_in}), got {batch.shape}")
        return self._run_layers(batch, 0, self.n_encoder_layers, train, rng)

    def decode(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.float64)
        if codes.ndim != 2 or codes.shape[1] != self.dim_z:
            raise ValueError(f"expected codes of shape (n, {self.dim_z}), got {codes.shape}")
        return self._run_layers(codes, self.n_encoder_layers, self.n_layers, False, None)

    def forward(self, batch, train: bool = False, rng=None):
        """Full pass caching per-layer state for backprop; returns (recon, z)."""
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dim_in:
            raise ValueError(f"expected batch of shape (n, {self.dim_in}), got {batch.shape}")
        cache: list = []
        z = self._run_layers(batch, 0, self.n_encoder_layers, train, rng, cache)
        recon = self._run_layers(z, self.n_encoder_layers, self.n_layers, train, rng, cache)
        self._cache = cache
        return recon, z

    # -- backward --------------------------------------------------------

    def backprop(self, grad_recon=None, grad_z=None) -> Gradients:
        """Exact gradients for the cached forward pass.

        ``grad_recon`` is the upstream gradient at the reconstruction,
        ``grad_z`` an extra gradient injected at the code layer (losses
        that differentiate through the encoder alone). Either may be None.
        """
        if self._cache is None:
            raise RuntimeError("backprop called without a cached forward pass")
        cache = self._cache
        n_rows = cache[0][0].shape[0]
        if grad_recon is None:
            grad_recon = np.zeros((n_rows, self.dim_in))
        g = np.asarray(grad_recon, dtype=np.float64)
        d_weights = [None] * self.n_layers
        d_biases = [None] * self.n_layers
        boundary = self.n_encoder_layers - 1
        for l in range(self.n_layers - 1, -1, -1):
            if l == boundary and grad_z is not None:
                g = g + grad_z  # g is currently the gradient at z
            a, h, mask, last = cache[l]
            if mask is not None:
                g = g * mask
            if not last:
                g = g * (h > 0)
            d_weights[l] = a.T @ g
            d_biases[l] = g.sum(axis=0)
            g = g @ self.weights[l].T
        return Gradients(weights=d_weights, biases=d_biases, inputs=g)


# -- optimizers ------------------------------------------------------------


@dataclass
class OptimizerState:
    """Adam or RMSProp state; accumulators mirror the parameter shapes."""

    kind: str
    learning_rate: float
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.9
    epsilon: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def adam(cls, params, learning_rate=1e-4, betas=(0.9, 0.999), epsilon=1e-8):
        return cls(
            kind="adam",
            learning_rate=learning_rate,
            beta1=betas[0],
            beta2=betas[1],
            epsilon=epsilon,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    @classmethod
    def rmsprop(cls, params, learning_rate, decay=0.9, epsilon=1e-8):
        return cls(
            kind="rmsprop",
            learning_rate=learning_rate,
            decay=decay,
            epsilon=epsilon,
            v=[np.zeros_like(p) for p in params],
        )


def optimizer_step(state: OptimizerState, params, grads) -> None:
    """One in-place update. Rejects non-finite gradients before touching params."""
    if len(params) != len(state.v):
        raise ValueError("parameter count does not match optimizer state")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.v[i].shape:
            raise ValueError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient entries at parameter {i}")
    state.step_count += 1
    if state.kind == "adam":
        t = state.step_count
        bc1 = 1.0 - state.beta1**t
        bc2 = 1.0 - state.beta2**t
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    elif state.kind == "rmsprop":
        for p, g, v in zip(params, grads, state.v):
            v *= state.decay
            v += (1.0 - state.decay) * g * g
            p -= state.learning_rate * g / np.sqrt(v + state.epsilon)
    else:
        raise ValueError(f"unknown optimizer kind {state.kind!r}")
    for i, p in enumerate(params):
        if not np.all(np.isfinite(p)):
            raise FloatingPointError(f"optimizer step produced non-finite parameter {i}")


# -- pretraining -----------------------------------------------------------


@dataclass
class PretrainConfig:
    hidden: tuple = DEFAULT_HIDDEN
    epochs: int = 50
    finetune_epochs: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-4
    betas: tuple = (0.9, 0.999)
    dropout: float = 0.2
    seed: int = 0


def reconstruction_mse(net: MlpAutoencoder, x) -> float:
    recon = net.decode(net.encode(x))
    return float(np.mean((recon - x) ** 2))


def _train_autoencoder(net, x, epochs, batch_size, lr, betas, seed, stream):
    """Plain MSE training of a full net (used for sub-nets and fine-tuning)."""
    opt = OptimizerState.adam(net.params(), learning_rate=lr, betas=betas)
    shuffle_rng = substream(seed, f"{stream}-shuffle")
    drop_rng = substream(seed, f"{stream}-dropout")
    n = x.shape[0]
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            xb = x[rows]
            recon, _ = net.forward(xb, train=True, rng=drop_rng)
            diff = recon - xb
            loss = np.mean(diff**2)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss in {stream} at epoch {epoch}, batch {start // batch_size}"
                )
            grads = net.backprop(grad_recon=2.0 * diff / diff.size)
            optimizer_step(opt, net.params(), grads.weights + grads.biases)


def layerwise_pretrain(x, config: PretrainConfig) -> MlpAutoencoder:
    """Greedy stacked-autoencoder pretraining followed by end-to-end fine-tuning.

    Each encoder layer is trained (together with its mirrored decoder
    layer) to reconstruct the frozen output of the layers below it, then
    the whole stack is fine-tuned on input reconstruction.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("pretraining needs a nonempty 2-d data matrix")
    sizes = [x.shape[1]] + list(config.hidden)
    net = MlpAutoencoder(sizes, dropout_rate=config.dropout, seed=config.seed)
    n_enc = net.n_encoder_layers

    if config.epochs > 0:
        acts = x
        for i in range(n_enc):
            sub = MlpAutoencoder([sizes[i], sizes[i + 1]], dropout_rate=config.dropout)
            mirror = net.n_layers - 1 - i
            sub.weights = [net.weights[i], net.weights[mirror]]
            sub.biases = [net.biases[i], net.biases[mirror]]
            _train_autoencoder(
                sub,
                acts,
                config.epochs,
                config.batch_size,
                config.learning_rate,
                config.betas,
                config.seed,
                f"pretrain-layer{i}",
            )
            acts = sub.encode(acts)  # frozen output feeds the next pair

    if config.finetune_epochs > 0:
        _train_autoencoder(
            net,
            x,
            config.finetune_epochs,
            config.batch_size,
            config.learning_rate,
            config.betas,
            config.seed,
            "finetune",
        )
    return net


# -- checkpoint format ------------------------------------------------------


def save_net(net: MlpAutoencoder, path) -> None:
    """Binary checkpoint: magic, layer count, then per layer rows/cols (u32
    little-endian) followed by row-major f64 weights and the bias vector."""
    with open(path, "wb") as f:
        f.write(NET_MAGIC)
        f.write(struct.pack("<I", net.n_layers))
        for w, b in zip(net.weights, net.biases):
            f.write(struct.pack("<II", w.shape[0], w.shape[1]))
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_net(path, dropout_rate: float = 0.2) -> MlpAutoencoder:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != NET_MAGIC:
        raise ValueError(f"{path}: bad magic, not a net checkpoint")
    (n_layers,) = struct.unpack_from("<I", blob, 8)
    if n_layers < 2 or n_layers % 2 != 0:
        raise ValueError(f"{path}: layer count {n_layers} is not a mirrored stack")
    off = 12
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = struct.unpack_from("<II", blob, off)
        off += 8
        w = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
        off += 8 * rows * cols
        b = np.frombuffer(blob, dtype="<f8", count=cols, offset=off)
        off += 8 * cols
        weights.append(w.copy())
        biases.append(b.copy())
    n_enc = n_layers // 2
    sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights[:n_enc]]
    net = MlpAutoencoder(sizes, dropout_rate=dropout_rate)
    net.weights = weights
    net.biases = biases
    return net
