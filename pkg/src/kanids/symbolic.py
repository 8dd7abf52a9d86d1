"""Snap trained spline edges to closed-form primitives and emit formulas.

Each edge's sampled (x, phi(x)) pairs are fit against the template
``y = a * g(b * x + c) + d`` for g in {identity, sin, cos, square}; the
identity ("linear") case pins b = 1 and c = 0 so a and d stay identifiable.
For fixed (b, c) the optimal (a, d) are closed-form least squares; (b, c) are
found by a deterministic grid search refined with halving coordinate-descent
steps, so snapping the same network twice gives byte-identical output.

The emitted formula names intermediate node expressions (A, B, ...) exactly
when they are referenced more than once or feed a multiplication node, which
is what makes the final text readable for wide networks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kan
from .kan import KanNetwork, LayerSpec

PRIMITIVE_ORDER = ("linear", "sin", "cos", "square")

B_GRID = np.geomspace(0.05, 5.0, 32)
C_GRID = -np.pi + np.arange(32) * (2 * np.pi / 32)
REFINE_STEPS = 20
DEDUP_TOL = 1e-9
MIN_SAMPLES = 8
MIN_SPREAD = 1e-6
_EXACT_SS = 1e-12
# sin and cos are one family up to phase, so their converged fits can differ
# by float noise only; r-squared gaps inside this window count as ties and
# the earlier primitive in PRIMITIVE_ORDER wins
R2_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Primitive:
    """One closed-form family: y = a * g(b*x + c) + d."""

    name: str

    def __post_init__(self):
        if self.name not in PRIMITIVE_ORDER:
            raise ValueError(f"unknown primitive {self.name!r}")

    def g(self, t):
        if self.name == "linear":
            return t
        if self.name == "sin":
            return np.sin(t)
        if self.name == "cos":
            return np.cos(t)
        return t * t  # square


def eval_primitive(name: str, a: float, b: float, c: float, d: float, x):
    return a * Primitive(name).g(b * np.asarray(x, dtype=float) + c) + d


@dataclass(frozen=True)
class PrimitiveFit:
    a: float
    b: float
    c: float
    d: float
    r_squared: float


def _affine_fit(Z, y):
    """Best (a, d) and residual for a*z + d ~ y, batched over leading axes of Z."""
    ybar = y.mean()
    yc = y - ybar
    zbar = Z.mean(axis=-1)
    zc = Z - zbar[..., None]
    var = np.sum(zc * zc, axis=-1)
    cov = np.sum(zc * yc, axis=-1)
    safe = np.where(var > 1e-15, var, 1.0)
    a = np.where(var > 1e-15, cov / safe, 0.0)
    d = ybar - a * zbar
    resid = a[..., None] * Z + d[..., None] - y
    return a, d, np.sum(resid * resid, axis=-1)


def _r_squared(ss_res: float, ss_tot: float) -> float:
    if ss_res < _EXACT_SS and ss_tot < _EXACT_SS:
        return 1.0
    return 1.0 - ss_res / ss_tot


def fit_primitive(samples, primitive: str) -> PrimitiveFit:
    """Fit one primitive family to (x, y) samples.

    Needs at least 8 samples with x spread above 1e-6. Nonlinear families
    search b over [0.05, 5] (32 log-spaced) x c over [-pi, pi) (32 uniform),
    then refine (b, c) with 20 coordinate-descent steps of halving size.
    """
    if isinstance(primitive, Primitive):
        primitive = primitive.name
    prim = Primitive(primitive)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be (x, y) pairs")
    if arr.shape[0] < MIN_SAMPLES:
        raise ValueError(f"insufficient samples: need >= {MIN_SAMPLES}, got {arr.shape[0]}")
    x, y = arr[:, 0], arr[:, 1]
    if x.max() - x.min() <= MIN_SPREAD:
        raise ValueError("degenerate x: sample locations do not spread")
    ss_tot = float(np.sum((y - y.mean()) ** 2))

    if prim.name == "linear":
        a, d, ss_res = _affine_fit(x[None, :], y)
        return PrimitiveFit(float(a[0]), 1.0, 0.0, float(d[0]),
                            _r_squared(float(ss_res[0]), ss_tot))

    bb, cc = np.meshgrid(B_GRID, C_GRID, indexing="ij")
    Z = prim.g(bb[..., None] * x + cc[..., None])
    _, _, ss = _affine_fit(Z, y)
    flat = int(np.argmin(ss))  # first minimum: deterministic tie-break
    b = float(bb.ravel()[flat])
    c = float(cc.ravel()[flat])

    def ss_at(bv: float, cv: float) -> float:
        _, _, s = _affine_fit(prim.g(bv * x + cv)[None, :], y)
        return float(s[0])

    best = ss_at(b, c)
    factor = (B_GRID[-1] / B_GRID[0]) ** (1.0 / (len(B_GRID) - 1))
    c_step = float(C_GRID[1] - C_GRID[0])
    for _ in range(REFINE_STEPS):
        for cand in (b * factor, b / factor):
            s = ss_at(cand, c)
            if s < best:
                best, b = s, cand
        for cand in (c + c_step, c - c_step):
            s = ss_at(b, cand)
            if s < best:
                best, c = s, cand
        factor = np.sqrt(factor)
        c_step *= 0.5

    a, d, ss_res = _affine_fit(prim.g(b * x + c)[None, :], y)
    return PrimitiveFit(float(a[0]), b, c, float(d[0]),
                        _r_squared(float(ss_res[0]), ss_tot))


def _dedup_pairs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    keep = [0]
    last = xs[0]
    for j in range(1, xs.size):
        if xs[j] - last > DEDUP_TOL:
            keep.append(j)
            last = xs[j]
    keep = np.asarray(keep)
    return np.column_stack([xs[keep], ys[keep]])


def sample_edge(network: KanNetwork, edge_id, data_batch) -> np.ndarray:
    """(x, phi(x)) pairs for one edge over a batch, deduplicated on x.

    ``edge_id`` is (layer, in_index, subnode_index).
    """
    X = np.asarray(data_batch, dtype=float)
    if X.size == 0:
        raise ValueError("empty batch")
    layer_index, in_index, subnode_index = edge_id
    if not 0 <= layer_index < len(network.layers):
        raise ValueError(f"unknown edge: layer {layer_index} out of range")
    layer = network.layers[layer_index]
    if not (0 <= in_index < layer.in_dim and 0 <= subnode_index < layer.spec.n_subnodes):
        raise ValueError(f"unknown edge: {edge_id}")
    _, cache = kan.forward(network, X)
    lc = cache.layers[layer_index]
    return _dedup_pairs(lc.x[:, in_index], lc.phi(layer)[:, in_index, subnode_index])


@dataclass
class SymbolicEdge:
    """A snapped edge: primitive family, fitted (a, b, c, d), fit quality."""

    primitive: str
    a: float
    b: float
    c: float
    d: float
    r_squared: float
    source: tuple  # (layer, in_index, node_index, subnode_index)
    low_fidelity: bool = False
    note: str = ""

    def __call__(self, x):
        return eval_primitive(self.primitive, self.a, self.b, self.c, self.d, x)


@dataclass
class SymbolicNetwork:
    """Primitive-edge mirror of a spline network, same node composition."""

    layer_specs: list
    edges: list  # per layer: list[in_dim] of list[n_subnodes] of SymbolicEdge
    input_dim: int

    def forward(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"shape mismatch: expected (m, {self.input_dim})")
        for spec, grid in zip(self.layer_specs, self.edges):
            sub = np.zeros((x.shape[0], spec.n_subnodes))
            for i, row in enumerate(grid):
                for o, edge in enumerate(row):
                    sub[:, o] += edge(x[:, i])
            x = kan._node_outputs(spec, sub)
        return x

    def all_edges(self):
        for grid in self.edges:
            for row in grid:
                yield from row


def _constant_fallback(pairs: np.ndarray, source, note: str) -> SymbolicEdge:
    y = pairs[:, 1]
    d = float(y.mean())
    ss = float(np.sum((y - d) ** 2))
    return SymbolicEdge("linear", 0.0, 1.0, 0.0, d, _r_squared(ss, ss),
                        source, low_fidelity=True, note=note)


def snap_network(network: KanNetwork, data_batch, r2_threshold: float = 0.9) -> SymbolicNetwork:
    """Snap every edge to its best-fitting primitive.

    Edges whose best fit stays below ``r2_threshold`` keep their linear fit
    and are flagged low-fidelity. Per-edge fit failures (too few or
    degenerate samples) fall back to a constant and never abort the snap.
    """
    X = np.asarray(data_batch, dtype=float)
    if X.size == 0:
        raise ValueError("empty batch")
    _, cache = kan.forward(network, X)
    layers_out = []
    for li, (layer, lc) in enumerate(zip(network.layers, cache.layers)):
        phi = lc.phi(layer)
        grid = []
        for i in range(layer.in_dim):
            row = []
            for o in range(layer.spec.n_subnodes):
                pairs = _dedup_pairs(lc.x[:, i], phi[:, i, o])
                source = (li, i, layer.node_of_subnode(o), o)
                try:
                    fits = {name: fit_primitive(pairs, name) for name in PRIMITIVE_ORDER}
                except ValueError as exc:
                    row.append(_constant_fallback(pairs, source, str(exc)))
                    continue
                best = "linear"
                for name in PRIMITIVE_ORDER:
                    if fits[name].r_squared > fits[best].r_squared + R2_TIE_TOL:
                        best = name
                if fits[best].r_squared < r2_threshold:
                    chosen, low = fits["linear"], True
                    best = "linear"
                else:
                    chosen, low = fits[best], False
                row.append(SymbolicEdge(best, chosen.a, chosen.b, chosen.c, chosen.d,
                                        chosen.r_squared, source, low_fidelity=low))
            grid.append(row)
        layers_out.append(grid)
    return SymbolicNetwork([l.spec for l in network.layers], layers_out, network.input_dim)


# --- formula emission ------------------------------------------------------

@dataclass(frozen=True)
class VarRef:
    index: int


@dataclass(frozen=True)
class NameRef:
    name: str


@dataclass(frozen=True)
class ProductRef:
    factors: tuple  # of NameRef


@dataclass(frozen=True)
class TermExpr:
    # a * g(b * operand + c); "linear" terms carry b = 1, c = 0
    a: float
    g: str
    b: float
    c: float
    operand: object


@dataclass(frozen=True)
class SumExpr:
    terms: tuple
    const: float


def _term_name(index: int) -> str:
    # A..Z, then AA, AB, ...
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if index < 26:
        return letters[index]
    return letters[index // 26 - 1] + letters[index % 26]


def _build_sum(edge_row, operands) -> SumExpr:
    terms = []
    const = 0.0
    for i, edge in enumerate(edge_row):
        terms.append(TermExpr(edge.a, edge.primitive, edge.b, edge.c, operands[i]))
        const += edge.d
    return SumExpr(tuple(terms), const)


@dataclass
class SymbolicFormula:
    """Per-class expression trees plus the shared named intermediate terms."""

    class_exprs: tuple
    named_defs: tuple  # ordered (name, expr) pairs; defs only use earlier names
    precision: int
    feature_names: list
    class_labels: tuple = ("malicious", "benign")

    # -- evaluation (full precision, no display rounding) --

    def _eval(self, expr, X, env):
        if isinstance(expr, VarRef):
            return X[:, expr.index]
        if isinstance(expr, NameRef):
            return env[expr.name]
        if isinstance(expr, ProductRef):
            out = np.ones(X.shape[0])
            for f in expr.factors:
                out = out * self._eval(f, X, env)
            return out
        if isinstance(expr, SumExpr):
            out = np.full(X.shape[0], expr.const)
            for t in expr.terms:
                inner = t.b * self._eval(t.operand, X, env) + t.c
                out = out + t.a * Primitive(t.g).g(inner)
            return out
        raise TypeError(f"unknown expression node {expr!r}")

    def evaluate(self, X) -> np.ndarray:
        """Full-precision evaluation; returns one column per output class."""
        X = np.asarray(X, dtype=float)
        env = {}
        for name, expr in self.named_defs:
            env[name] = self._eval(expr, X, env)
        cols = [self._eval(e, X, env) for e in self.class_exprs]
        return np.column_stack(cols)

    # -- human-readable text --

    def _sym(self, index: int) -> str:
        return self.feature_names[index]

    def _fmt(self, v: float) -> str:
        return f"{v:.{self.precision}f}"

    def _render_operand(self, op) -> str:
        if isinstance(op, VarRef):
            return self._sym(op.index)
        if isinstance(op, NameRef):
            return op.name
        if isinstance(op, ProductRef):
            return " · ".join(f.name for f in op.factors)
        if isinstance(op, SumExpr):
            return "(" + self._render_sum(op) + ")"
        raise TypeError(f"unknown expression node {op!r}")

    def _render_term_body(self, t: TermExpr) -> str:
        operand = self._render_operand(t.operand)
        if t.g == "linear":
            return f"{self._fmt(abs(t.a))}·{operand}"
        fn = {"sin": "sin", "cos": "cos", "square": "square"}[t.g]
        inner = f"{self._fmt(t.b)}·{operand}"
        if abs(t.c) >= 10.0 ** (-self.precision):
            sign = "+" if t.c >= 0 else "-"
            inner += f" {sign} {self._fmt(abs(t.c))}"
        return f"{self._fmt(abs(t.a))}·{fn}({inner})"

    def _render_sum(self, s: SumExpr) -> str:
        eps = 10.0 ** (-self.precision)
        parts = []
        for t in s.terms:
            if abs(t.a) < eps:
                continue  # invisibly small coefficient
            parts.append((t.a < 0, self._render_term_body(t)))
        if abs(s.const) >= eps or not parts:
            parts.append((s.const < 0, self._fmt(abs(s.const))))
        out = []
        for i, (neg, body) in enumerate(parts):
            if i == 0:
                out.append(("-" if neg else "") + body)
            else:
                out.append((" - " if neg else " + ") + body)
        return "".join(out)

    def _render_def(self, expr) -> str:
        if isinstance(expr, SumExpr):
            return self._render_sum(expr)
        return self._render_operand(expr)

    def text(self) -> str:
        lines = []
        for c, expr in enumerate(self.class_exprs):
            lines.append(f"f_{self.class_labels[c]} = {self._render_def(expr)}")
        if self.named_defs:
            lines.append("where:")
            for name, expr in self.named_defs:
                lines.append(f"  {name} = {self._render_def(expr)}")
        return "\n".join(lines) + "\n"

    # -- machine-readable prefix text (full precision, fully inlined) --

    def _prefix(self, expr, env) -> str:
        if isinstance(expr, VarRef):
            return f"x{expr.index + 1}"
        if isinstance(expr, NameRef):
            return env[expr.name]
        if isinstance(expr, ProductRef):
            return "(* " + " ".join(self._prefix(f, env) for f in expr.factors) + ")"
        if isinstance(expr, SumExpr):
            parts = []
            for t in expr.terms:
                inner = self._prefix(t.operand, env)
                if t.b != 1.0 or t.c != 0.0:
                    inner = f"(+ (* {t.b!r} {inner}) {t.c!r})"
                if t.g != "linear":
                    fn = {"sin": "sin", "cos": "cos", "square": "sq"}[t.g]
                    inner = f"({fn} {inner})"
                parts.append(f"(* {t.a!r} {inner})")
            parts.append(repr(expr.const))
            if len(parts) == 1:
                return parts[0]
            return "(+ " + " ".join(parts) + ")"
        raise TypeError(f"unknown expression node {expr!r}")

    def prefix_text(self) -> str:
        """One fully inlined prefix expression per output class.

        Variables are x1..xd (1-based column order); header comments map them
        to feature names.
        """
        env = {}
        for name, expr in self.named_defs:
            env[name] = self._prefix(expr, env)
        lines = [f"# x{i + 1} = {n}" for i, n in enumerate(self.feature_names)]
        for c, expr in enumerate(self.class_exprs):
            lines.append(f"# class {c} ({self.class_labels[c]})")
            lines.append(self._prefix(expr, env))
        return "\n".join(lines) + "\n"


def emit_formula(sym: SymbolicNetwork, precision: int = 4,
                 feature_names=None) -> SymbolicFormula:
    """Build the per-class formula for a snapped network.

    Intermediate node expressions become named terms (A, B, ...) exactly when
    more than one downstream edge references them or a multiplication node
    consumes them; everything else is inlined.
    """
    if feature_names is None:
        feature_names = [f"x_{i + 1}" for i in range(sym.input_dim)]
    if len(feature_names) != sym.input_dim:
        raise ValueError("feature name count does not match input dimension")
    named_defs = []
    counter = 0

    def add_def(expr):
        nonlocal counter
        name = _term_name(counter)
        counter += 1
        named_defs.append((name, expr))
        return NameRef(name)

    operands = [VarRef(i) for i in range(sym.input_dim)]
    class_exprs = None
    n_layers = len(sym.layer_specs)
    for li, (spec, grid) in enumerate(zip(sym.layer_specs, sym.edges)):
        subs = [_build_sum([grid[i][o] for i in range(len(grid))], operands)
                for o in range(spec.n_subnodes)]
        last = li == n_layers - 1
        fanout = 0 if last else sym.layer_specs[li + 1].n_subnodes
        next_ops = []
        for j in range(spec.n_nodes):
            if j < spec.n_add:
                expr = subs[j]
            else:
                k = spec.n_add + (j - spec.n_add) * spec.mult_arity
                factors = tuple(add_def(subs[k + a]) for a in range(spec.mult_arity))
                expr = ProductRef(factors)
            if last or fanout == 1:
                next_ops.append(expr)
            else:
                next_ops.append(add_def(expr))
        operands = next_ops
    # final layer is additive (output spec is the integer 2), so these are sums
    class_exprs = tuple(operands)
    return SymbolicFormula(class_exprs, tuple(named_defs), int(precision),
                           list(feature_names))
