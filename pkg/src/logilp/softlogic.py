"""Differentiable relaxation of grounded constraints.

Connectives take Lukasiewicz semantics over [0,1] truth values:

    not(a)        = 1 - a
    and(a1..an)   = max(0, sum(a) - (n - 1))
    or(a1..an)    = min(1, sum(a))
    if(a, b)      = min(1, 1 - a + b)
    atMost(k, a)  = clip(1 + k - sum(a), 0, 1)

On 0/1 inputs these coincide with the boolean connectives. The violation
degree of a constraint is one minus its relaxed truth, always in [0,1],
with a subgradient over the score vector; at the min/max kinks the
active branches' gradients are averaged so evaluation stays
deterministic.
"""

from __future__ import annotations

import numpy as np

from .ground import GAnd, GAtMost, GConst, GExpr, GIf, GNot, GOr, GVar


def soft_eval(expr: GExpr, scores) -> float:
    """Relaxed truth value of a grounded expression in [0,1]."""
    p = np.asarray(scores, dtype=float)
    return _forward(expr, p)


def _forward(expr: GExpr, p: np.ndarray) -> float:
    if isinstance(expr, GVar):
        return float(p[expr.index])
    if isinstance(expr, GConst):
        return 1.0 if expr.value else 0.0
    if isinstance(expr, GNot):
        return 1.0 - _forward(expr.child, p)
    if isinstance(expr, GAnd):
        s = sum(_forward(c, p) for c in expr.children)
        return max(0.0, s - (len(expr.children) - 1))
    if isinstance(expr, GOr):
        return min(1.0, sum(_forward(c, p) for c in expr.children))
    if isinstance(expr, GIf):
        return min(1.0, 1.0 - _forward(expr.antecedent, p) + _forward(expr.consequent, p))
    if isinstance(expr, GAtMost):
        s = sum(_forward(c, p) for c in expr.children)
        return min(1.0, max(0.0, 1.0 + expr.k - s))
    raise TypeError(f"not a grounded expression: {expr!r}")


def violation(expr: GExpr, scores) -> tuple[float, np.ndarray]:
    """Violation degree (1 - relaxed truth) and its subgradient.

    The gradient is with respect to the full score vector; entries for
    variables the expression does not mention are zero.
    """
    p = np.asarray(scores, dtype=float)
    grad = np.zeros_like(p)
    truth = _backward(expr, p, -1.0, grad)  # d(violation)/d(truth) = -1
    return 1.0 - truth, grad


def _clip_factor(inner: float, lo: float | None, hi: float | None) -> float:
    """Derivative of a clip at ``inner``; ties average flat and active sides."""
    factor = 1.0
    if lo is not None:
        if inner < lo:
            return 0.0
        if inner == lo:
            factor *= 0.5
    if hi is not None:
        if inner > hi:
            return 0.0
        if inner == hi:
            factor *= 0.5
    return factor


def _backward(expr: GExpr, p: np.ndarray, out_grad: float, grad: np.ndarray) -> float:
    """Forward value; accumulates out_grad * d(value)/d(p) into grad."""
    if isinstance(expr, GVar):
        grad[expr.index] += out_grad
        return float(p[expr.index])
    if isinstance(expr, GConst):
        return 1.0 if expr.value else 0.0
    if isinstance(expr, GNot):
        return 1.0 - _backward(expr.child, p, -out_grad, grad)
    if isinstance(expr, (GAnd, GOr, GAtMost)):
        values = [_forward(c, p) for c in expr.children]
        s = float(sum(values))
        if isinstance(expr, GAnd):
            inner = s - (len(values) - 1)
            factor = _clip_factor(inner, 0.0, None)
            result = max(0.0, inner)
            sign = 1.0
        elif isinstance(expr, GOr):
            inner = s
            factor = _clip_factor(inner, None, 1.0)
            result = min(1.0, inner)
            sign = 1.0
        else:
            inner = 1.0 + expr.k - s
            factor = _clip_factor(inner, 0.0, 1.0)
            result = min(1.0, max(0.0, inner))
            sign = -1.0
        if factor != 0.0:
            for c in expr.children:
                _backward(c, p, out_grad * factor * sign, grad)
        return result
    if isinstance(expr, GIf):
        a = _forward(expr.antecedent, p)
        b = _forward(expr.consequent, p)
        inner = 1.0 - a + b
        factor = _clip_factor(inner, None, 1.0)
        if factor != 0.0:
            _backward(expr.antecedent, p, -out_grad * factor, grad)
            _backward(expr.consequent, p, out_grad * factor, grad)
        return min(1.0, inner)
    raise TypeError(f"not a grounded expression: {expr!r}")
