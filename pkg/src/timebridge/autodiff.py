"""Minimal float64 tensor engine with a reverse-mode tape.

Operations record themselves on the active :class:`Tape` (if any) when at least
one input requires a gradient. Outside a tape everything runs as plain numpy,
which is what finite-difference probes and inference use.

Broadcasting is deliberately narrow: elementwise ops accept equal shapes, a
trailing-axes operand (bias add) or a python scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Tape",
    "ComplexPair",
    "ShapeError",
    "ConfigError",
    "ContractError",
    "tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "matmul",
    "reshape",
    "transpose",
    "sum_all",
    "mean_all",
    "softmax",
    "layer_norm",
    "gelu",
    "abs_",
    "smooth_modulus",
    "avg_pool_1d",
    "dft_real",
    "backward",
    "finite_diff_check",
    "gradient_errors",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""


class ContractError(RuntimeError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class Tensor:
    """Dense float64 array, optionally a node on a tape.

    ``node_id`` is the index of the tape record that produced the tensor;
    leaves (parameters, inputs) have ``node_id is None``.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(d < 1 for d in arr.shape):
            raise ShapeError(f"tensor dimensions must be >= 1, got {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; all route through the recorded ops below
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass
class ComplexPair:
    """Real and imaginary parts of a complex-valued tensor."""

    real: Tensor
    imag: Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ShapeError(f"real {self.real.shape} and imag {self.imag.shape} differ")


@dataclass
class _Record:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    op: str


@dataclass
class Tape:
    """Ordered log of differentiable operations.

    Use as a context manager; ops executed inside the ``with`` block are
    recorded here. Records are appended in execution order, which is a
    topological order by construction.
    """

    records: list[_Record] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


_ACTIVE: list[Tape] = []


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, inputs: Iterable[Tensor], out_data: np.ndarray, bwd) -> Tensor:
    inputs = tuple(inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.name = None
    out.node_id = None
    out.requires_grad = any(t.requires_grad for t in inputs)
    if out.requires_grad and _ACTIVE:
        tape = _ACTIVE[-1]
        out.node_id = len(tape.records)
        tape.records.append(_Record(inputs, out, bwd, op))
    return out


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # undo the bias-add style broadcast (trailing axes aligned)
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    g = grad.sum(axis=tuple(range(lead))) if lead > 0 else grad
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    small, big = (a, b) if a.ndim <= b.ndim else (b, a)
    tail = big.shape[big.ndim - small.ndim:]
    if all(s == t or s == 1 for s, t in zip(small.shape, tail)):
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not compatible")


# ----------------------------------------------------------------------------
# elementwise
# ----------------------------------------------------------------------------


def add(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        a = _as_tensor(a)
        return _record("add_scalar", (a,), a.data + float(b), lambda g: (g,))
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "add")
    sa, sb = a.shape, b.shape
    return _record("add", (a, b), a.data + b.data, lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return add(a, -float(b))
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _record("sub", (a, b), a.data - b.data, lambda g: (_reduce_to(g, sa), -_reduce_to(g, sb)))


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _record("scale", (a,), a.data * c, lambda g: (g * c,))


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return scale(a, b)
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "mul")
    ad, bd = a.data, b.data
    return _record(
        "mul", (a, b), ad * bd, lambda g: (_reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape))
    )


def neg(a) -> Tensor:
    return scale(a, -1.0)


# ----------------------------------------------------------------------------
# linear algebra / shape
# ----------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Batched matrix product ``a[..., m, k] @ b[..., k, n]``.

    ``b`` may be a plain 2-D matrix shared across the batch, or carry the
    same leading batch shape as ``a``. A 2-D ``a`` against a batched ``b``
    is also accepted (shared left factor).
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: batch shapes differ in {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if a.ndim == 2 and g.ndim > 2:
            ga = ga.reshape(-1, *ad.shape).sum(axis=0)
        if b.ndim == 2 and ad.ndim > 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return _record("matmul", (a, b), ad @ bd, bwd)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    return _record("reshape", (a,), a.data.reshape(tuple(shape)), lambda g: (g.reshape(old),))


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _record("transpose", (a,), np.ascontiguousarray(a.data.transpose(axes)), lambda g: (g.transpose(inv),))


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    shp = a.shape
    return _record("sum", (a,), np.array([a.data.sum()]), lambda g: (np.full(shp, g[0]),))


def mean_all(a) -> Tensor:
    a = _as_tensor(a)
    shp, n = a.shape, a.size
    return _record("mean", (a,), np.array([a.data.mean()]), lambda g: (np.full(shp, g[0] / n),))


# ----------------------------------------------------------------------------
# nonlinearities
# ----------------------------------------------------------------------------


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax: axis {axis} invalid for shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _record("softmax", (x,), y, bwd)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply ``gain * xhat + bias``."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape}/bias {bias.shape} must be ({d},)")
    if eps <= 0:
        raise ConfigError("layer_norm: eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    gd = gain.data

    def bwd(g):
        gx_hat = g * gd
        gx = rstd * (
            gx_hat - gx_hat.mean(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _record("layer_norm", (x, gain, bias), xhat * gd + bias.data, bwd)


_SQRT1_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x) -> Tensor:
    """Exact (erf) GELU."""
    x = _as_tensor(x)
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _SQRT1_2))

    def bwd(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return _record("gelu", (x,), xd * cdf, bwd)


def abs_(x) -> Tensor:
    """Absolute value; subgradient 0 at exact zeros."""
    x = _as_tensor(x)
    s = np.sign(x.data)
    return _record("abs", (x,), np.abs(x.data), lambda g: (g * s,))


def smooth_modulus(re, im, eps: float = 1e-12) -> Tensor:
    """``sqrt(re**2 + im**2 + eps**2)``, a differentiable complex modulus."""
    re, im = _as_tensor(re), _as_tensor(im)
    if re.shape != im.shape:
        raise ShapeError(f"smooth_modulus: {re.shape} vs {im.shape}")
    r = np.sqrt(re.data**2 + im.data**2 + eps * eps)
    rd, idata = re.data, im.data
    return _record("modulus", (re, im), r, lambda g: (g * rd / r, g * idata / r))


# ----------------------------------------------------------------------------
# fixed linear maps along the last axis
# ----------------------------------------------------------------------------


def _check_kernel(kernel: int, length: int) -> None:
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"moving-average kernel must be a positive odd integer, got {kernel}")
    if kernel > length:
        raise ConfigError(f"moving-average kernel {kernel} exceeds series length {length}")


@lru_cache(maxsize=64)
def _pool_matrix(length: int, kernel: int) -> np.ndarray:
    half = kernel // 2
    mat = np.zeros((length, length))
    for i in range(length):
        for j in range(i - half, i + half + 1):
            mat[i, min(max(j, 0), length - 1)] += 1.0 / kernel
    mat.setflags(write=False)
    return mat


def _pool_forward(xd: np.ndarray, kernel: int) -> np.ndarray:
    half = kernel // 2
    if half == 0:
        return xd.copy()
    pad = [(0, 0)] * (xd.ndim - 1) + [(half, half)]
    padded = np.pad(xd, pad, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, kernel, axis=-1)
    # centre + mean(offsets) so that constant windows return the centre bit-exactly
    return xd + (win - xd[..., None]).mean(axis=-1)


def avg_pool_1d(x, kernel: int) -> Tensor:
    """Centred moving average over the last axis with edge-replicate padding."""
    x = _as_tensor(x)
    length = x.shape[-1]
    _check_kernel(kernel, length)
    mat = _pool_matrix(length, kernel)
    return _record("avg_pool_1d", (x,), _pool_forward(x.data, kernel), lambda g: (g @ mat,))


@lru_cache(maxsize=64)
def _dft_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(n)
    # reduce k*m mod n before the trig call to keep large-n phases accurate
    ang = 2.0 * np.pi * ((np.outer(k, k) % n) / n)
    cos, sin = np.cos(ang), -np.sin(ang)
    cos.setflags(write=False)
    sin.setflags(write=False)
    return cos, sin


def dft_real(x) -> ComplexPair:
    """Dense DFT of a real signal along the last axis.

    ``X[k] = sum_n x[n] exp(-2 pi i k n / len)``. Both matrices are
    symmetric so the adjoint is another right-multiplication.
    """
    x = _as_tensor(x)
    n = x.shape[-1]
    cos, sin = _dft_matrices(n)
    if x.ndim == 1:
        row = reshape(x, (1, n))
        return ComplexPair(reshape(matmul(row, Tensor(cos)), (n,)), reshape(matmul(row, Tensor(sin)), (n,)))
    return ComplexPair(matmul(x, Tensor(cos)), matmul(x, Tensor(sin)))


# ----------------------------------------------------------------------------
# reverse pass
# ----------------------------------------------------------------------------


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf on ``tape``.

    Leaf gradients are added to any existing ``grad``; call ``zero_grad``
    between steps.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node_id is None or loss.node_id >= len(tape.records) or tape.records[loss.node_id].output is not loss:
        raise ContractError("loss was not produced on this tape")
    node_grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    leaf_grads: dict[int, tuple[Tensor, np.ndarray]] = {}
    for idx in range(loss.node_id, -1, -1):
        g = node_grads.pop(idx, None)
        if g is None:
            continue
        rec = tape.records[idx]
        for inp, gi in zip(rec.inputs, rec.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.node_id is not None:
                prev = node_grads.get(inp.node_id)
                node_grads[inp.node_id] = gi if prev is None else prev + gi
            else:
                key = id(inp)
                if key in leaf_grads:
                    leaf_grads[key] = (inp, leaf_grads[key][1] + gi)
                else:
                    leaf_grads[key] = (inp, gi)
    for leaf, g in leaf_grads.values():
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def _central_difference(f: Callable[[], Tensor], flat: np.ndarray, i: int, eps: float, stencil: int) -> float:
    orig = flat[i]
    try:
        if stencil == 2:
            flat[i] = orig + eps
            fp = f().item()
            flat[i] = orig - eps
            fm = f().item()
            return (fp - fm) / (2.0 * eps)
        vals = []
        for k in (2, 1, -1, -2):
            flat[i] = orig + k * eps
            vals.append(f().item())
        return (-vals[0] + 8.0 * vals[1] - 8.0 * vals[2] + vals[3]) / (12.0 * eps)
    finally:
        flat[i] = orig


def gradient_errors(
    f: Callable[[], Tensor],
    params: dict[str, Tensor] | Sequence[Tensor],
    eps: float = 1e-5,
    stencil: int = 2,
) -> dict[str, float]:
    """Per-parameter worst relative error between tape and central differences.

    ``f`` takes no arguments and reads the parameters it closes over; it is
    re-evaluated with each coordinate nudged. ``stencil=2`` is the classic
    ``(f(p+eps) - f(p-eps)) / (2 eps)``; ``stencil=4`` is the five-point
    central rule, accurate to O(eps^4), which tolerates a larger ``eps`` and
    so keeps roundoff below the 1e-8 denominator floor for tiny gradients.
    The relative error uses ``max(|analytic|, |numeric|, 1e-8)``.

    Inputs must sit away from kinks (ties in ``abs``): a stencil that
    straddles one disagrees with the subgradient.
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if stencil not in (2, 4):
        raise ConfigError("stencil must be 2 or 4")
    named = params if isinstance(params, dict) else {f"p{i}": p for i, p in enumerate(params)}
    for p in named.values():
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    backward(tape, loss)
    out = {}
    for name, p in named.items():
        analytic = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        flat = p.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            num = _central_difference(f, flat, i, eps, stencil)
            ana = analytic[i]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-8))
        out[name] = worst
    return out


def finite_diff_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor] | Sequence[Tensor],
    eps: float = 1e-5,
    stencil: int = 2,
) -> float:
    """Largest relative tape-vs-central-difference error over all coordinates."""
    errs = gradient_errors(f, params, eps, stencil)
    return max(errs.values(), default=0.0)
