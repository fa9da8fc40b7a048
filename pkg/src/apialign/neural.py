"""Dense float64 math with reverse-mode gradients.

Every differentiable operation is a method on :class:`Tape`. In recording
mode each call appends a backward closure; :meth:`Tape.backward` replays
them in reverse. Recurrent cells are fused ops with hand-derived
backward passes so one timestep costs one tape entry.

A non-recording tape evaluates values only and multiplies matrices one
row at a time, which makes every output row independent of how many rows
were batched together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

DTYPE = np.float64
INIT_SCALE = 0.08

GRU_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")
TANH_NAMES = ("W", "U", "b")


def sigmoid(x):
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def rowwise_matmul(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0], w.shape[1]), dtype=DTYPE)
    for i in range(a.shape[0]):
        out[i] = a[i] @ w
    return out


def _check_gru_dims(p: Mapping[str, np.ndarray], x: np.ndarray, h: np.ndarray) -> None:
    in_dim, hid = p["W_z"].shape
    if x.shape[-1] != in_dim:
        raise ValueError(f"input dim {x.shape[-1]} does not match weights ({in_dim})")
    if h.shape[-1] != hid:
        raise ValueError(f"hidden dim {h.shape[-1]} does not match weights ({hid})")
    for gate in "zrh":
        if p[f"W_{gate}"].shape != (in_dim, hid) or p[f"U_{gate}"].shape != (hid, hid) \
                or p[f"b_{gate}"].shape != (hid,):
            raise ValueError(f"inconsistent shapes for gate {gate}")


def _gru_forward(p, x, h, mm):
    z = sigmoid(mm(x, p["W_z"]) + mm(h, p["U_z"]) + p["b_z"])
    r = sigmoid(mm(x, p["W_r"]) + mm(h, p["U_r"]) + p["b_r"])
    rh = r * h
    c = np.tanh(mm(x, p["W_h"]) + mm(rh, p["U_h"]) + p["b_h"])
    h_new = z * h + (1.0 - z) * c
    return h_new, (z, r, rh, c)


@dataclass
class GruParams:
    """Weights of one GRU direction: ``W_*`` (input, hidden), ``U_*``
    (hidden, hidden), ``b_*`` (hidden,) for the update (z), reset (r) and
    candidate (h) transforms."""

    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W_z.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in GRU_NAMES}

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GruParams":
        shapes = gru_shapes(input_dim, hidden_dim)
        return cls(**{n: np.zeros(s, dtype=DTYPE) for n, s in shapes.items()})


def gru_shapes(input_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for gate in "zrh":
        shapes[f"W_{gate}"] = (input_dim, hidden_dim)
        shapes[f"U_{gate}"] = (hidden_dim, hidden_dim)
        shapes[f"b_{gate}"] = (hidden_dim,)
    return shapes


def tanh_shapes(input_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
    return {"W": (input_dim, hidden_dim), "U": (hidden_dim, hidden_dim), "b": (hidden_dim,)}


def gru_step(params: GruParams, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One GRU update for a single vector or a (batch, dim) matrix:
    ``h = z * h_prev + (1 - z) * tanh(x W_h + (r * h_prev) U_h + b_h)``."""
    p = params.as_dict()
    x = np.atleast_2d(np.asarray(x_t, dtype=DTYPE))
    h = np.atleast_2d(np.asarray(h_prev, dtype=DTYPE))
    _check_gru_dims(p, x, h)
    h_new, _ = _gru_forward(p, x, h, np.matmul)
    return h_new.reshape(np.shape(h_prev))


def softmax_cross_entropy(logits, target_index: int) -> tuple[float, np.ndarray]:
    """Return ``(-log p[target], p)`` with ``p = softmax(logits)``."""
    z = np.asarray(logits, dtype=DTYPE)
    z = z - z.max()
    e = np.exp(z)
    total = e.sum()
    probs = e / total
    loss = math.log(total) - z[target_index]
    return float(loss), probs


class Var:
    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = value
        self.grad = None

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Var(shape={self.shape})"


def _acc(v: Var, g) -> None:
    if v.grad is None:
        v.grad = np.array(g, dtype=DTYPE, copy=True)
    else:
        v.grad = v.grad + g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tape:
    """Records forward operations so gradients can be replayed backwards."""

    def __init__(self, record: bool = True):
        self.record = record
        self._ops: list[Callable[[], None]] = []
        self._consumed = False
        self._mm = np.matmul if record else rowwise_matmul

    def __len__(self) -> int:
        return len(self._ops)

    def leaf(self, value) -> Var:
        return Var(np.asarray(value, dtype=DTYPE))

    def _push(self, fn) -> None:
        if self.record:
            self._ops.append(fn)

    # elementwise and linear ops ---------------------------------------
    def matmul(self, a: Var, w: Var) -> Var:
        out = Var(self._mm(a.value, w.value))

        def back():
            if out.grad is not None:
                _acc(a, out.grad @ w.value.T)
                _acc(w, a.value.T @ out.grad)
        self._push(back)
        return out

    def add(self, a: Var, b: Var) -> Var:
        out = Var(a.value + b.value)

        def back():
            if out.grad is not None:
                _acc(a, _unbroadcast(out.grad, np.shape(a.value)))
                _acc(b, _unbroadcast(out.grad, np.shape(b.value)))
        self._push(back)
        return out

    def mul(self, a: Var, b: Var) -> Var:
        out = Var(a.value * b.value)

        def back():
            if out.grad is not None:
                _acc(a, _unbroadcast(out.grad * b.value, np.shape(a.value)))
                _acc(b, _unbroadcast(out.grad * a.value, np.shape(b.value)))
        self._push(back)
        return out

    def scale(self, a: Var, c: float) -> Var:
        out = Var(a.value * c)

        def back():
            if out.grad is not None:
                _acc(a, out.grad * c)
        self._push(back)
        return out

    def linear(self, x: Var, w: Var, b: Var) -> Var:
        return self.add(self.matmul(x, w), b)

    def tanh(self, a: Var) -> Var:
        out = Var(np.tanh(a.value))

        def back():
            if out.grad is not None:
                _acc(a, out.grad * (1.0 - out.value ** 2))
        self._push(back)
        return out

    def sigmoid(self, a: Var) -> Var:
        out = Var(sigmoid(np.asarray(a.value, dtype=DTYPE)))

        def back():
            if out.grad is not None:
                _acc(a, out.grad * out.value * (1.0 - out.value))
        self._push(back)
        return out

    def sum(self, a: Var) -> Var:
        out = Var(np.asarray(a.value).sum())

        def back():
            if out.grad is not None:
                _acc(a, np.full(np.shape(a.value), out.grad, dtype=DTYPE))
        self._push(back)
        return out

    def concat(self, parts: list[Var]) -> Var:
        out = Var(np.concatenate([p.value for p in parts], axis=-1))
        bounds = np.cumsum([0] + [p.value.shape[-1] for p in parts])

        def back():
            if out.grad is not None:
                for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
                    _acc(p, out.grad[..., lo:hi])
        self._push(back)
        return out

    def take(self, table: Var, idx: np.ndarray) -> Var:
        """Embedding lookup: rows of ``table`` at ``idx``."""
        out = Var(table.value[idx])

        def back():
            if out.grad is not None:
                g = np.zeros_like(table.value)
                np.add.at(g, idx, out.grad)
                _acc(table, g)
        self._push(back)
        return out

    def where(self, mask: np.ndarray, a: Var, b: Var) -> Var:
        """Row-wise select: rows of ``a`` where mask is true, else ``b``."""
        m = np.asarray(mask, dtype=bool).reshape(-1, *([1] * (np.ndim(a.value) - 1)))
        out = Var(np.where(m, a.value, b.value))

        def back():
            if out.grad is not None:
                _acc(a, np.where(m, out.grad, 0.0))
                _acc(b, np.where(m, 0.0, out.grad))
        self._push(back)
        return out

    # fused cells ------------------------------------------------------
    def gru(self, p: Mapping[str, Var], x: Var, h: Var) -> Var:
        vals = {k: v.value for k, v in p.items()}
        h_new, (z, r, rh, c) = _gru_forward(vals, x.value, h.value, self._mm)
        out = Var(h_new)

        def back():
            g = out.grad
            if g is None:
                return
            xv, hv = x.value, h.value
            dz = g * (hv - c)
            dh = g * z
            da_h = g * (1.0 - z) * (1.0 - c ** 2)
            _acc(p["W_h"], xv.T @ da_h)
            _acc(p["U_h"], rh.T @ da_h)
            _acc(p["b_h"], da_h.sum(axis=0))
            drh = da_h @ vals["U_h"].T
            dh = dh + drh * r
            da_r = drh * hv * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            for gate, da in (("r", da_r), ("z", da_z)):
                _acc(p[f"W_{gate}"], xv.T @ da)
                _acc(p[f"U_{gate}"], hv.T @ da)
                _acc(p[f"b_{gate}"], da.sum(axis=0))
            dx = da_h @ vals["W_h"].T + da_r @ vals["W_r"].T + da_z @ vals["W_z"].T
            dh = dh + da_r @ vals["U_r"].T + da_z @ vals["U_z"].T
            _acc(x, dx)
            _acc(h, dh)
        self._push(back)
        return out

    def tanh_cell(self, p: Mapping[str, Var], x: Var, h: Var) -> Var:
        """Plain recurrence ``h = tanh(x W + h U + b)``."""
        mm = self._mm
        out = Var(np.tanh(mm(x.value, p["W"].value) + mm(h.value, p["U"].value) + p["b"].value))

        def back():
            if out.grad is None:
                return
            da = out.grad * (1.0 - out.value ** 2)
            _acc(p["W"], x.value.T @ da)
            _acc(p["U"], h.value.T @ da)
            _acc(p["b"], da.sum(axis=0))
            _acc(x, da @ p["W"].value.T)
            _acc(h, da @ p["U"].value.T)
        self._push(back)
        return out

    def masked_xent(self, logits: Var, targets: np.ndarray, mask: np.ndarray) -> Var:
        """Sum over unmasked rows of ``-log softmax(logits)[target]``."""
        z = logits.value - logits.value.max(axis=1, keepdims=True)
        e = np.exp(z)
        total = e.sum(axis=1, keepdims=True)
        rows = np.arange(len(targets))
        nll = np.log(total[:, 0]) - z[rows, targets]
        m = np.asarray(mask, dtype=bool)
        out = Var(np.where(m, nll, 0.0).sum())

        def back():
            if out.grad is None:
                return
            g = e / total
            g[rows, targets] -= 1.0
            g *= (m * out.grad)[:, None]
            _acc(logits, g)
        self._push(back)
        return out

    # ------------------------------------------------------------------
    def backward(self, loss: Var) -> None:
        if not self.record:
            raise RuntimeError("tape was created with record=False")
        if not self._ops:
            raise RuntimeError("backward called before any forward operation was recorded")
        if self._consumed:
            raise RuntimeError("backward already ran on this tape")
        if np.ndim(loss.value) != 0:
            raise ValueError("backward needs a scalar loss")
        loss.grad = np.asarray(1.0, dtype=DTYPE)
        for fn in reversed(self._ops):
            fn()
        self._consumed = True


@dataclass
class ParamStore:
    """Named parameters plus Adadelta's running averages of squared
    gradients and squared updates."""

    params: dict[str, np.ndarray]
    sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    sq_update: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0

    def __post_init__(self):
        for name, value in self.params.items():
            self.params[name] = np.asarray(value, dtype=DTYPE)
            self.sq_grad.setdefault(name, np.zeros_like(self.params[name]))
            self.sq_update.setdefault(name, np.zeros_like(self.params[name]))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __iter__(self):
        return iter(self.names())

    def names(self) -> list[str]:
        return sorted(self.params)

    def size(self) -> int:
        return sum(v.size for v in self.params.values())

    def copy(self) -> "ParamStore":
        return ParamStore(
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.sq_grad.items()},
            {k: v.copy() for k, v in self.sq_update.items()},
            self.steps,
        )

    def leaves(self, tape: Tape) -> dict[str, Var]:
        return {name: tape.leaf(self.params[name]) for name in self.names()}


def init_params(shapes: Mapping[str, tuple[int, ...]], seed: int, scale: float = INIT_SCALE) -> ParamStore:
    """Uniform(-scale, scale) initialisation in sorted-name order."""
    rng = np.random.default_rng(seed)
    params = {name: rng.uniform(-scale, scale, size=shapes[name]).astype(DTYPE) for name in sorted(shapes)}
    return ParamStore(params)


def collect_grads(leaves: Mapping[str, Var]) -> dict[str, np.ndarray]:
    """Gradients of a finished tape keyed by parameter name; unused ones are zero."""
    return {
        name: (np.zeros_like(v.value) if v.grad is None else np.asarray(v.grad, dtype=DTYPE))
        for name, v in leaves.items()
    }


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in sorted(grads)))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        grads = {k: v * factor for k, v in grads.items()}
    return grads, norm


def adadelta_update(store: ParamStore, grads: Mapping[str, np.ndarray],
                    rho: float = 0.95, epsilon: float = 1e-6) -> ParamStore:
    """In-place Adadelta step::

        E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
        dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
        x       <- x + dx
    """
    if set(grads) != set(store.params):
        missing = set(store.params) ^ set(grads)
        raise ValueError(f"gradient names do not match parameters: {sorted(missing)[:5]}")
    for name in store.names():
        g = grads[name]
        if np.shape(g) != store.params[name].shape:
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {store.params[name].shape} for {name}")
        eg = rho * store.sq_grad[name] + (1.0 - rho) * g * g
        dx = -np.sqrt(store.sq_update[name] + epsilon) / np.sqrt(eg + epsilon) * g
        store.sq_grad[name] = eg
        store.sq_update[name] = rho * store.sq_update[name] + (1.0 - rho) * dx * dx
        store.params[name] = store.params[name] + dx
    store.steps += 1
    return store


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int
    per_group: dict[str, float]
    worst: tuple[str, tuple[int, ...], float, float] | None

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"gradient check {status}: max relative error {self.max_rel_error:.3e} over {self.n_checked} coordinates (tol {self.tolerance:g})"


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    """``|a - n| / (|a| + |n|)``; the denominator is floored so that two
    near-zero values do not blow up the ratio."""
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def gradient_check(fn: Callable[[Mapping[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]],
                   params: dict[str, np.ndarray], tolerance: float = 1e-4, n_samples: int = 200,
                   eps: float = 1e-5, seed: int = 0, floor: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    ``fn(params)`` must return ``(loss, grads)``. Coordinates are sampled
    from every parameter group in proportion to its size, at least
    ``n_samples`` in total (or all of them when there are fewer). ``params``
    is perturbed in place and restored.
    """
    _, analytic = fn(params)
    analytic = {k: np.array(v, dtype=DTYPE) for k, v in analytic.items()}
    rng = np.random.default_rng(seed)
    names = sorted(params)
    total = sum(params[n].size for n in names)
    per_group: dict[str, float] = {}
    worst = None
    max_err = 0.0
    n_checked = 0
    for name in names:
        arr = params[name]
        k = arr.size if total <= n_samples else min(arr.size, max(2, math.ceil(n_samples * arr.size / total)))
        flat_idx = rng.choice(arr.size, size=k, replace=False)
        group_err = 0.0
        for fi in sorted(flat_idx):
            idx = np.unravel_index(fi, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + eps
            lp, _ = fn(params)
            arr[idx] = orig - eps
            lm, _ = fn(params)
            arr[idx] = orig
            numeric = (lp - lm) / (2 * eps)
            a = float(analytic[name][idx])
            err = relative_error(a, numeric, floor)
            n_checked += 1
            group_err = max(group_err, err)
            if worst is None or err > max_err:
                max_err = err
                worst = (name, tuple(int(i) for i in idx), a, numeric)
        per_group[name] = group_err
    return GradCheckReport(max_err, tolerance, n_checked, per_group, worst)
