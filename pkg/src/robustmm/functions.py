"""Parametric spread-response functions used by the quoting model.

Fill sensitivities h and baseline flows f are small parametric curves of
the half-spread. Three shapes cover the models we calibrate: a constant,
an affine ramp, and an exponential decay.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

_ARITY = {"constant": 1, "affine": 2, "exp_decay": 2}

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


@dataclass(frozen=True)
class FunctionSpec:
    """One scalar function of the half-spread eps >= 0.

    kind        formula
    constant    c
    affine      a + b * eps
    exp_decay   a * exp(-k * eps)
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in _ARITY:
            raise ValueError(f"unknown function kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {_ARITY[self.kind]} parameter(s), got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise ValueError(f"{self.kind} parameters must be finite, got {params}")
        object.__setattr__(self, "params", params)

    def __call__(self, eps):
        e = np.asarray(eps, dtype=float)
        if self.kind == "constant":
            out = np.full(e.shape, self.params[0])
        elif self.kind == "affine":
            a, b = self.params
            out = a + b * e
        else:
            a, k = self.params
            out = a * np.exp(-k * e)
        if out.ndim == 0:
            return float(out)
        return out

    def __str__(self) -> str:
        args = ", ".join(repr(p) for p in self.params)
        return f"{self.kind}({args})"


def constant(c: float) -> FunctionSpec:
    return FunctionSpec("constant", (c,))


def affine(a: float, b: float) -> FunctionSpec:
    return FunctionSpec("affine", (a, b))


def exp_decay(a: float, k: float) -> FunctionSpec:
    return FunctionSpec("exp_decay", (a, k))


def parse_function_spec(text: str) -> FunctionSpec:
    """Parse "affine(0.5, 0.1)" style syntax into a FunctionSpec."""
    m = _SPEC_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse function spec {text!r}")
    kind = m.group(1)
    raw = m.group(2).strip()
    try:
        params = tuple(float(tok) for tok in raw.split(",")) if raw else ()
    except ValueError as exc:
        raise ValueError(f"bad numeric parameter in function spec {text!r}") from exc
    return FunctionSpec(kind, params)
