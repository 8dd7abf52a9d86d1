"""Independent oracles used by the test suite.

Everything here is deliberately written from scratch (scalar loops, textbook
recursions, a small expression interpreter) so the tests never share code
paths with the implementations they check.
"""
from __future__ import annotations

import math
import re


def naive_basis(knots, p: int, i: int, t: float) -> float:
    """Textbook recursive Cox-de Boor evaluation of B_{i,p}(t)."""
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        if t == knots[-1] and i == len(knots) - 2:
            return 1.0
        return 0.0
    left = 0.0
    if knots[i + p] != knots[i]:
        left = (t - knots[i]) / (knots[i + p] - knots[i]) * naive_basis(knots, p - 1, i, t)
    right = 0.0
    if knots[i + p + 1] != knots[i + 1]:
        right = ((knots[i + p + 1] - t) / (knots[i + p + 1] - knots[i + 1])
                 * naive_basis(knots, p - 1, i + 1, t))
    return left + right


def naive_silu(x: float) -> float:
    if x >= 0:
        return x / (1.0 + math.exp(-x))
    e = math.exp(x)
    return x * e / (1.0 + e)


def naive_network_logits(network, row) -> list:
    """Scalar-loop re-implementation of the spline-edge network forward pass."""
    x = [float(v) for v in row]
    for layer in network.layers:
        grid = layer.grid
        subs = []
        for o in range(layer.spec.n_subnodes):
            total = 0.0
            for i in range(layer.in_dim):
                xi = x[i]
                xc = min(max(xi, grid.range_min), grid.range_max)
                s_val = sum(
                    float(layer.coeffs[i, o, k]) * naive_basis(grid.knots, grid.degree, k, xc)
                    for k in range(grid.num_bases)
                )
                total += (float(layer.base_weight[i, o]) * naive_silu(xi)
                          + float(layer.spline_weight[i, o]) * s_val)
            subs.append(total)
        nodes = subs[: layer.spec.n_add]
        ar = layer.spec.mult_arity
        for j in range(layer.spec.n_mult):
            prod = 1.0
            for a in range(ar):
                prod *= subs[layer.spec.n_add + j * ar + a]
            nodes.append(prod)
        x = nodes
    return x


# --- prefix expression interpreter ------------------------------------------

def _tokenize_prefix(text: str):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield from line.replace("(", " ( ").replace(")", " ) ").split()


def parse_prefix_file(text: str):
    """Parse the machine-readable formula file into one tree per class."""
    tokens = list(_tokenize_prefix(text))
    pos = 0

    def parse():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            op = tokens[pos]
            pos += 1
            args = []
            while tokens[pos] != ")":
                args.append(parse())
            pos += 1
            return (op, args)
        if tok == ")":
            raise ValueError("unbalanced parenthesis")
        try:
            return float(tok)
        except ValueError:
            return tok  # variable symbol

    exprs = []
    while pos < len(tokens):
        exprs.append(parse())
    return exprs


def eval_prefix(expr, variables: dict) -> float:
    if isinstance(expr, float):
        return expr
    if isinstance(expr, str):
        return variables[expr]
    op, args = expr
    vals = [eval_prefix(a, variables) for a in args]
    if op == "+":
        return sum(vals)
    if op == "*":
        out = 1.0
        for v in vals:
            out *= v
        return out
    if op == "sin":
        return math.sin(vals[0])
    if op == "cos":
        return math.cos(vals[0])
    if op == "sq":
        return vals[0] * vals[0]
    raise ValueError(f"unknown operator {op!r}")


# --- human-readable formula interpreter --------------------------------------

_TOKEN_RE = re.compile(r"\s*(\d+\.\d+|\d+|[A-Za-z_][A-Za-z_0-9]*|[()+\-·])")


def _tokenize_infix(text: str):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ValueError(f"cannot tokenize {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


class InfixParser:
    """Evaluates the rendered formula text: sums of coefficient-scaled factors."""

    FUNCS = {"sin": math.sin, "cos": math.cos, "square": lambda v: v * v}

    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse_expr(self) -> float:
        value = self.parse_term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.parse_term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def parse_term(self) -> float:
        sign = 1.0
        while self.peek() == "-":
            self.take()
            sign = -sign
        value = self.parse_factor()
        while self.peek() == "·":
            self.take()
            value *= self.parse_factor()
        return sign * value

    def parse_factor(self) -> float:
        tok = self.take()
        if tok == "(":
            value = self.parse_expr()
            assert self.take() == ")"
            return value
        if tok in self.FUNCS:
            assert self.take() == "("
            inner = self.parse_expr()
            assert self.take() == ")"
            return self.FUNCS[tok](inner)
        if re.fullmatch(r"\d+\.\d+|\d+", tok):
            return float(tok)
        return self.variables[tok]


def eval_formula_text(text: str, variables: dict) -> dict:
    """Evaluate every ``name = expression`` line; returns name -> value.

    ``variables`` maps feature symbols to floats. Named terms may reference
    each other; they are resolved lazily.
    """
    defs = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line in ("where:",):
            continue
        name, sep, body = line.partition(" = ")
        if not sep:
            continue
        defs[name.strip()] = body.strip()
    cache = dict(variables)

    def resolve(name: str) -> float:
        if name in cache:
            return cache[name]
        env = _LazyEnv(resolve)
        parser = InfixParser(_tokenize_infix(defs[name]), env)
        value = parser.parse_expr()
        assert parser.peek() is None, f"trailing tokens in {name}"
        cache[name] = value
        return value

    return {name: resolve(name) for name in defs}


class _LazyEnv:
    def __init__(self, resolve):
        self.resolve = resolve

    def __getitem__(self, key):
        return self.resolve(key)


# --- DOT well-formedness ------------------------------------------------------

_DOT_NODE = re.compile(r"^\s*\w+\s*(\[[^\[\]]*\])?\s*;$")
_DOT_EDGE = re.compile(r"^\s*\w+\s*->\s*\w+\s*(\[[^\[\]]*\])?\s*;$")
_DOT_ATTR = re.compile(r"^\s*\w+\s*=\s*\w+\s*;$")


def check_dot(text: str):
    """Validate DOT structure; returns (node statement count, edge count)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert re.fullmatch(r"digraph \w+ \{", lines[0]), lines[0]
    assert lines[-1].strip() == "}"
    nodes = edges = 0
    for line in lines[1:-1]:
        first_word = re.match(r"\s*(\w+)", line)
        if _DOT_EDGE.match(line):
            edges += 1
        elif _DOT_ATTR.match(line):
            continue
        elif _DOT_NODE.match(line.replace('"', "")) or _dot_node_quoted(line):
            if first_word and first_word.group(1) in ("node", "edge", "graph"):
                continue  # default-attribute statement, not a node
            nodes += 1
        else:
            raise AssertionError(f"unparseable DOT line: {line!r}")
    return nodes, edges


_DOT_NODE_Q = re.compile(r'^\s*\w+\s*(\[(\w+\s*=\s*("[^"]*"|[\w.]+)\s*,?\s*)*\])?\s*;$')


def _dot_node_quoted(line: str) -> bool:
    return bool(_DOT_NODE_Q.match(line))
