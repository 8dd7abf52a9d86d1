"""Spline-edge network core: layers, forward/backward, Adam training, export.

Every edge of the network carries a learnable univariate function

    phi(x) = base_weight * silu(x) + spline_weight * s(x)

where ``s`` is a B-spline curve and ``silu(x) = x / (1 + exp(-x))``. Nodes sum
their incoming edge outputs; multiplication nodes additionally multiply the
sums of their subnodes, which lets the network express products of learned
feature groups. Layers hold their edge parameters as dense arrays so the
forward and backward passes stay vectorized; :class:`EdgeFunction` provides a
per-edge view when one edge at a time is needed.

Training is single-threaded and deterministic: a seed fixes initialization
and the per-epoch shuffles, and the trailing partial batch of every epoch is
dropped, so iterations per epoch = floor(n_train / batch_size).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import splines
from .errors import TrainingDivergedError
from .splines import KnotGrid, SplineCurve


def silu(x):
    """Numerically stable x * sigmoid(x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = x[pos] / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = x[~pos] * ex / (1.0 + ex)
    return out


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def silu_grad(x):
    """Derivative of silu: sigmoid(x) * (1 + x * (1 - sigmoid(x)))."""
    s = _sigmoid(x)
    return s * (1.0 + np.asarray(x, dtype=float) * (1.0 - s))


@dataclass(frozen=True)
class GridConfig:
    """Knot-grid settings shared by every edge of a network."""

    range_min: float = splines.DEFAULT_RANGE_MIN
    range_max: float = splines.DEFAULT_RANGE_MAX
    num_intervals: int = splines.DEFAULT_NUM_INTERVALS
    degree: int = splines.DEFAULT_DEGREE

    def make(self) -> KnotGrid:
        return splines.make_grid(self.range_min, self.range_max, self.num_intervals, self.degree)


@dataclass(frozen=True)
class EdgeFunction:
    """A single edge's learnable function (a read-only view into a layer)."""

    spline: SplineCurve
    base_weight: float
    spline_weight: float

    def __call__(self, x):
        return self.base_weight * silu(x) + self.spline_weight * splines.curve_values(
            self.spline, x
        )


@dataclass(frozen=True)
class LayerSpec:
    """Node structure of one layer: addition nodes plus multiplication nodes."""

    n_add: int
    n_mult: int = 0
    mult_arity: int = 2

    def __post_init__(self):
        if self.n_add < 0 or self.n_mult < 0:
            raise ValueError("node counts must be non-negative")
        if self.n_add + self.n_mult < 1:
            raise ValueError("a layer needs at least one node")
        if self.n_mult > 0 and self.mult_arity < 2:
            raise ValueError("multiplication nodes need arity >= 2")

    @property
    def n_nodes(self) -> int:
        return self.n_add + self.n_mult

    @property
    def n_subnodes(self) -> int:
        return self.n_add + self.mult_arity * self.n_mult


class KanLayer:
    """One layer: an in_dim x n_subnodes matrix of edge functions.

    Subnodes are laid out as the ``n_add`` addition nodes first, then the
    ``mult_arity`` subnodes of each multiplication node consecutively.
    """

    def __init__(self, in_dim: int, spec: LayerSpec, grid: KnotGrid,
                 coeffs: np.ndarray, base_weight: np.ndarray, spline_weight: np.ndarray):
        k = grid.num_bases
        if coeffs.shape != (in_dim, spec.n_subnodes, k):
            raise ValueError("coefficient array shape mismatch")
        if base_weight.shape != (in_dim, spec.n_subnodes):
            raise ValueError("base_weight shape mismatch")
        if spline_weight.shape != (in_dim, spec.n_subnodes):
            raise ValueError("spline_weight shape mismatch")
        self.in_dim = in_dim
        self.spec = spec
        self.grid = grid
        self.coeffs = coeffs
        self.base_weight = base_weight
        self.spline_weight = spline_weight

    def edge(self, in_index: int, subnode_index: int) -> EdgeFunction:
        """Per-edge view; mutating the layer afterwards is not reflected."""
        curve = SplineCurve(self.grid, self.coeffs[in_index, subnode_index].copy())
        return EdgeFunction(
            curve,
            float(self.base_weight[in_index, subnode_index]),
            float(self.spline_weight[in_index, subnode_index]),
        )

    def node_of_subnode(self, subnode_index: int) -> int:
        if subnode_index < self.spec.n_add:
            return subnode_index
        return self.spec.n_add + (subnode_index - self.spec.n_add) // self.spec.mult_arity


@dataclass
class LayerCache:
    x: np.ndarray          # raw layer input (m, in_dim)
    x_clamped: np.ndarray  # input clamped to the grid range
    in_range: np.ndarray   # bool mask: input inside the grid range
    basis: np.ndarray      # (m, in_dim, k)
    silu_x: np.ndarray     # (m, in_dim)
    spline_val: np.ndarray  # per-edge spline values (m, in_dim, n_subnodes)
    sub: np.ndarray        # subnode sums (m, n_subnodes)

    def phi(self, layer: KanLayer) -> np.ndarray:
        """Per-edge outputs (m, in_dim, n_subnodes)."""
        return (layer.base_weight * self.silu_x[:, :, None]
                + layer.spline_weight * self.spline_val)


@dataclass
class ForwardCache:
    batch_size: int
    layers: list
    saturated: int  # inputs clamped to the grid range anywhere in the pass


class KanNetwork:
    """Layered spline-edge classifier; the final layer always has two nodes."""

    def __init__(self, layers: list, width_spec, input_dim: int, grid_config: GridConfig):
        self.layers = layers
        self.width_spec = list(width_spec)
        self.input_dim = int(input_dim)
        self.output_dim = 2
        self.grid_config = grid_config

    def parameters(self) -> list:
        """Live parameter arrays, three per layer: coeffs, base_weight, spline_weight."""
        out = []
        for layer in self.layers:
            out.extend([layer.coeffs, layer.base_weight, layer.spline_weight])
        return out

    def set_parameters(self, params: list) -> None:
        if len(params) != 3 * len(self.layers):
            raise ValueError("parameter list length mismatch")
        for i, layer in enumerate(self.layers):
            coeffs, base_w, spline_w = params[3 * i : 3 * i + 3]
            if (coeffs.shape != layer.coeffs.shape
                    or base_w.shape != layer.base_weight.shape
                    or spline_w.shape != layer.spline_weight.shape):
                raise ValueError("parameter shape mismatch")
            layer.coeffs = coeffs
            layer.base_weight = base_w
            layer.spline_weight = spline_w

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def _parse_width_entry(entry) -> LayerSpec:
    if isinstance(entry, (int, np.integer)):
        return LayerSpec(int(entry), 0)
    if isinstance(entry, (tuple, list)) and len(entry) == 2:
        return LayerSpec(int(entry[0]), int(entry[1]))
    raise ValueError(f"invalid width entry {entry!r}: expected int or (n_add, n_mult) pair")


def build_network(width_spec, grid_config: GridConfig | None = None, seed: int = 0) -> KanNetwork:
    """Construct a network from a width spec like ``[in_dim, 16, 8, 2]``.

    Hidden entries may be plain ints (addition nodes only) or ``(n_add,
    n_mult)`` pairs. The first entry is the input dimension and the last must
    be the integer 2 (the benign/malicious output pair). Initialization is
    deterministic for a given seed: spline coefficients ~ N(0, (0.1/k)^2),
    base weights ~ N(0, 1/in_dim), spline weights = 1.
    """
    if grid_config is None:
        grid_config = GridConfig()
    width_spec = list(width_spec)
    if len(width_spec) < 2:
        raise ValueError("invalid width spec: need at least [input_dim, 2]")
    if not isinstance(width_spec[0], (int, np.integer)) or width_spec[0] < 1:
        raise ValueError("invalid width spec: first entry must be the input dimension (>= 1)")
    if not isinstance(width_spec[-1], (int, np.integer)) or int(width_spec[-1]) != 2:
        raise ValueError("invalid width spec: last entry must be 2 (output classes)")
    grid = grid_config.make()
    k = grid.num_bases
    rng = np.random.default_rng(seed)
    layers = []
    in_dim = int(width_spec[0])
    for entry in width_spec[1:]:
        spec = _parse_width_entry(entry)
        n_sub = spec.n_subnodes
        coeffs = rng.normal(0.0, 0.1 / k, size=(in_dim, n_sub, k))
        base_w = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, n_sub))
        spline_w = np.ones((in_dim, n_sub))
        layers.append(KanLayer(in_dim, spec, grid, coeffs, base_w, spline_w))
        in_dim = spec.n_nodes
    return KanNetwork(layers, width_spec, int(width_spec[0]), grid_config)


def _node_outputs(spec: LayerSpec, sub: np.ndarray) -> np.ndarray:
    if spec.n_mult == 0:
        return sub
    m = sub.shape[0]
    mult = sub[:, spec.n_add :].reshape(m, spec.n_mult, spec.mult_arity).prod(axis=2)
    return np.concatenate([sub[:, : spec.n_add], mult], axis=1)


def forward(network: KanNetwork, batch) -> tuple:
    """Run the network on an (m, input_dim) batch; returns (logits, cache)."""
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != network.input_dim:
        raise ValueError(
            f"shape mismatch: expected (m, {network.input_dim}) batch, got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("batch contains non-finite entries")
    caches = []
    saturated = 0
    for layer in network.layers:
        grid = layer.grid
        x_cl = np.clip(x, grid.range_min, grid.range_max)
        in_range = (x >= grid.range_min) & (x <= grid.range_max)
        saturated += int(x.size - np.count_nonzero(in_range))
        basis = splines.basis_matrix(grid, x_cl)
        s_val = np.einsum("mik,iok->mio", basis, layer.coeffs)
        silu_x = silu(x)
        phi = layer.base_weight * silu_x[:, :, None] + layer.spline_weight * s_val
        sub = phi.sum(axis=1)
        caches.append(LayerCache(x, x_cl, in_range, basis, silu_x, s_val, sub))
        x = _node_outputs(layer.spec, sub)
    return x, ForwardCache(batch_size=x.shape[0], layers=caches, saturated=saturated)


def _mult_backward(spec: LayerSpec, sub: np.ndarray, d_nodes: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. subnode sums given gradient w.r.t. node outputs."""
    na, nm, ar = spec.n_add, spec.n_mult, spec.mult_arity
    d_sub = np.empty_like(sub)
    d_sub[:, :na] = d_nodes[:, :na]
    if nm:
        m = sub.shape[0]
        sub_m = sub[:, na:].reshape(m, nm, ar)
        d_node_m = d_nodes[:, na:]
        d_sub_m = np.empty_like(sub_m)
        for j in range(ar):  # product rule: leave-one-out products
            others = [jj for jj in range(ar) if jj != j]
            d_sub_m[:, :, j] = d_node_m * sub_m[:, :, others].prod(axis=2)
        d_sub[:, na:] = d_sub_m.reshape(m, nm * ar)
    return d_sub


def backward(network: KanNetwork, cache: ForwardCache, dlogits) -> list:
    """Exact reverse-mode gradients for every parameter.

    Returns arrays in the same order as :meth:`KanNetwork.parameters`.
    Spline inputs that were clamped in the forward pass get zero gradient
    through the spline term (the clamp is flat there) while the silu base
    term always uses the raw input.
    """
    dlogits = np.asarray(dlogits, dtype=float)
    if len(cache.layers) != len(network.layers):
        raise ValueError("stale cache: layer count mismatch")
    if dlogits.shape != (cache.batch_size, 2):
        raise ValueError("stale cache: dlogits shape mismatch")
    grads: list = [None] * (3 * len(network.layers))
    d_nodes = dlogits
    for li in range(len(network.layers) - 1, -1, -1):
        layer = network.layers[li]
        lc = cache.layers[li]
        if lc.x.shape != (cache.batch_size, layer.in_dim):
            raise ValueError("stale cache: layer input shape mismatch")
        d_sub = _mult_backward(layer.spec, lc.sub, d_nodes)
        d_phi = np.broadcast_to(d_sub[:, None, :], lc.spline_val.shape)
        d_spline_w = np.einsum("mio,mio->io", d_phi, lc.spline_val)
        d_base_w = np.einsum("mio,mi->io", d_phi, lc.silu_x)
        d_coeffs = np.einsum("mio,mik->iok", d_phi, lc.basis) * layer.spline_weight[:, :, None]
        grads[3 * li] = d_coeffs
        grads[3 * li + 1] = d_base_w
        grads[3 * li + 2] = d_spline_w
        if li > 0:
            dbasis = splines.basis_derivative_matrix(layer.grid, lc.x_clamped)
            s_prime = np.einsum("mik,iok->mio", dbasis, layer.coeffs)
            d_x = (np.einsum("mio,io->mi", d_phi, layer.base_weight) * silu_grad(lc.x)
                   + np.einsum("mio,mio,io->mi", d_phi, s_prime, layer.spline_weight)
                   * lc.in_range)
            d_nodes = d_x
    return grads


def loss_softmax_xent(logits, labels) -> tuple:
    """Mean cross-entropy of softmax(logits); returns (loss, dloss/dlogits)."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ValueError(f"logits must be (m, 2), got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ValueError("labels length does not match logits")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("invalid label: labels must be 0 or 1")
    labels = labels.astype(int)
    m = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    loss = float(-log_probs[np.arange(m), labels].mean())
    probs = np.exp(log_probs)
    onehot = np.zeros_like(probs)
    onehot[np.arange(m), labels] = 1.0
    return loss, (probs - onehot) / m


@dataclass(frozen=True)
class AdamState:
    """Adam moment estimates; beta/epsilon defaults are the usual constants."""

    first_moment: tuple
    second_moment: tuple
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init_like(cls, params) -> "AdamState":
        zeros = tuple(np.zeros_like(p) for p in params)
        return cls(zeros, tuple(np.zeros_like(p) for p in params), 0)


def adam_step(params, grads, state: AdamState, lr: float) -> tuple:
    """One bias-corrected Adam update. Pure: inputs are not mutated."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("shape mismatch: params/grads/state lengths differ")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch: param {p.shape} vs grad {g.shape}")
    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    new_m, new_v, new_p = [], [], []
    for p, g, m1, v1 in zip(params, grads, state.first_moment, state.second_moment):
        m2 = b1 * m1 + (1 - b1) * g
        v2 = b2 * v1 + (1 - b2) * g * g
        mhat = m2 / (1 - b1**t)
        vhat = v2 / (1 - b2**t)
        new_m.append(m2)
        new_v.append(v2)
        new_p.append(p - lr * mhat / (np.sqrt(vhat) + eps))
    return new_p, AdamState(tuple(new_m), tuple(new_v), t, b1, b2, eps)


def iteration_count(n_train: int, batch_size: int, epochs: int) -> int:
    """Total optimizer steps with drop-last batching: floor(n/B) * epochs."""
    if batch_size > n_train:
        raise ValueError(f"batch too large: batch_size {batch_size} > n_train {n_train}")
    return (n_train // batch_size) * epochs


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.device != "cpu":
            raise ValueError("only device='cpu' is supported")


@dataclass
class TrainHistory:
    """Loss log (every 100 iterations), per-epoch validation accuracy, timing."""

    loss_log: list = field(default_factory=list)           # (iteration, mean batch loss)
    val_accuracy: list = field(default_factory=list)       # (epoch, accuracy)
    total_iterations: int = 0
    wall_seconds: float = 0.0
    saturated_inputs: int = 0


LOSS_LOG_INTERVAL = 100


def train(network: KanNetwork, train_set, val_set, config: TrainConfig) -> tuple:
    """Adam + softmax cross-entropy training; returns (network, TrainHistory).

    ``train_set`` and ``val_set`` are (features, labels) pairs. Each epoch
    reshuffles with a seed derived as config.seed + epoch and drops the
    trailing partial batch. A non-finite loss aborts immediately.
    """
    X, y = train_set
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] != network.input_dim:
        raise ValueError(f"shape mismatch: features {X.shape} vs input_dim {network.input_dim}")
    if y.shape != (X.shape[0],):
        raise ValueError("labels length does not match features")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("invalid label: labels must be 0 or 1")
    n = X.shape[0]
    iters_per_epoch = iteration_count(n, config.batch_size, 1)
    history = TrainHistory(total_iterations=iters_per_epoch * config.epochs)
    params = network.parameters()
    state = AdamState.init_like(params)
    start = time.perf_counter()
    iteration = 0
    window: list = []
    for epoch in range(config.epochs):
        order = np.random.default_rng(config.seed + epoch).permutation(n)
        for b in range(iters_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            logits, cache = forward(network, X[idx])
            loss, dlogits = loss_softmax_xent(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at iteration {iteration + 1} "
                    f"(epoch {epoch + 1}); try a smaller learning rate"
                )
            history.saturated_inputs += cache.saturated
            grads = backward(network, cache, dlogits)
            params, state = adam_step(params, grads, state, config.learning_rate)
            network.set_parameters(params)
            iteration += 1
            window.append(loss)
            if iteration % LOSS_LOG_INTERVAL == 0:
                history.loss_log.append((iteration, float(np.mean(window))))
                window = []
        val_labels, _ = predict(network, val_set[0])
        acc = float(np.mean(val_labels == np.asarray(val_set[1])))
        history.val_accuracy.append((epoch + 1, acc))
    if window:
        history.loss_log.append((iteration, float(np.mean(window))))
    history.wall_seconds = time.perf_counter() - start
    return network, history


PREDICT_CHUNK = 8192


def predict(network: KanNetwork, features) -> tuple:
    """Class labels and softmax probabilities; ties go to class 0 (malicious)."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != network.input_dim:
        raise ValueError(f"shape mismatch: features {X.shape} vs input_dim {network.input_dim}")
    probs = np.empty((X.shape[0], 2))
    for lo in range(0, X.shape[0], PREDICT_CHUNK):
        logits, _ = forward(network, X[lo : lo + PREDICT_CHUNK])
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs[lo : lo + PREDICT_CHUNK] = e / e.sum(axis=1, keepdims=True)
    # argmax returns the first index on ties, which is class 0
    labels = np.argmax(probs, axis=1)
    return labels, probs


def edge_importance(network: KanNetwork, sample_batch) -> list:
    """Mean |phi(x)| per edge over a batch, scaled to max 1 within each layer."""
    X = np.asarray(sample_batch, dtype=float)
    if X.size == 0:
        raise ValueError("empty batch")
    _, cache = forward(network, X)
    scores = []
    for layer, lc in zip(network.layers, cache.layers):
        raw = np.abs(lc.phi(layer)).mean(axis=0)
        top = raw.max()
        scores.append(raw / top if top > 0 else raw)
    return scores


def export_dot(network: KanNetwork, importances: list, feature_names=None,
               class_labels=("malicious", "benign")) -> str:
    """Render the architecture as Graphviz DOT with importance-scaled edges.

    One graph node per network node; one graph edge per edge function, with
    penwidth proportional to its importance (floor 0.1 so nothing vanishes).
    """
    if len(importances) != len(network.layers):
        raise ValueError("mismatched importances: wrong number of layers")
    for layer, imp in zip(network.layers, importances):
        if np.asarray(imp).shape != (layer.in_dim, layer.spec.n_subnodes):
            raise ValueError("mismatched importances: wrong shape for a layer")
    if feature_names is None:
        feature_names = [f"x_{i + 1}" for i in range(network.input_dim)]
    if len(feature_names) != network.input_dim:
        raise ValueError("feature name count does not match input dimension")

    def node_id(layer_index: int, node: int) -> str:
        if layer_index < 0:
            return f"in{node}"
        if layer_index == len(network.layers) - 1:
            return f"out{node}"
        return f"h{layer_index}_{node}"

    lines = ["digraph kan {", "  rankdir=BT;", "  node [shape=circle];"]
    for i, name in enumerate(feature_names):
        label = str(name).replace('"', r"\"")
        lines.append(f'  in{i} [label="{label}", shape=box];')
    for li, layer in enumerate(network.layers):
        last = li == len(network.layers) - 1
        for j in range(layer.spec.n_nodes):
            if last:
                lines.append(f'  out{j} [label="{class_labels[j]}", shape=doublecircle];')
            else:
                mark = "+" if j < layer.spec.n_add else "*"
                lines.append(f'  h{li}_{j} [label="{mark}"];')
    for li, (layer, imp) in enumerate(zip(network.layers, importances)):
        imp = np.asarray(imp)
        for i in range(layer.in_dim):
            for o in range(layer.spec.n_subnodes):
                width = max(0.1, 4.0 * float(imp[i, o]))
                src = node_id(li - 1, i)
                dst = node_id(li, layer.node_of_subnode(o))
                lines.append(f"  {src} -> {dst} [penwidth={width:.3f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
