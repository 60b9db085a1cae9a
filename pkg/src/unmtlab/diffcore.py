"""Minimal reverse-mode automatic differentiation over dense float64 matrices.

Everything is a 2-D float64 matrix. A Tape records primitive applications
(op kind, input node ids, output node id, cached forward value) in topological
order; backward() walks the record in reverse. The primitive set is exactly
what a one-sentence attentional seq2seq step needs:

    matmul, add, radd (row-broadcast add), tanh, sigmoid, mul (elementwise),
    softmax (row-wise), hconcat, lookup (embedding row gather),
    ce (masked cross-entropy over a softmax row)

A Raw executor exposes the same op surface but evaluates eagerly without
recording, sharing the forward kernels bit-for-bit; it backs greedy decoding
and the finite-difference probes.

Finiteness discipline: every value entering the tape is checked once, at the
ops that can create non-finite values from finite inputs (leaves, matmul,
add, radd, mul, ce). tanh/sigmoid/softmax outputs are bounded and
hconcat/lookup only move entries, so checking them would be redundant.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

__all__ = [
    "PRIMITIVES",
    "ShapeError",
    "NonFiniteError",
    "GradientCheckError",
    "Tape",
    "Raw",
    "RAW",
    "as_matrix",
    "forward_primitive",
    "backward",
    "finite_diff_check",
    "sgd_step",
]

PRIMITIVES = (
    "matmul",
    "add",
    "radd",
    "tanh",
    "sigmoid",
    "mul",
    "softmax",
    "hconcat",
    "lookup",
    "ce",
)

_dot = np.dot
_isfinite = math.isfinite


class ShapeError(ValueError):
    """Operand shapes do not conform to the primitive's contract."""


class NonFiniteError(ValueError):
    """A value carrying NaN or +/-Inf entered a forward or backward pass."""


class GradientCheckError(RuntimeError):
    """Finite-difference probing hit a non-finite loss; carries the coordinate."""

    def __init__(self, message: str, param_index: int, coord: int):
        super().__init__(message)
        self.param_index = param_index
        self.coord = coord


def as_matrix(values) -> np.ndarray:
    """Coerce to a 2-D float64 ndarray (the only tensor type here)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


_reduce_all = np.add.reduce


def _require_finite(arr: np.ndarray, what: str) -> None:
    # fast path: a finite array almost always has a finite sum; fall back to
    # the exact elementwise check only when the sum overflows
    s = arr[0, 0] if arr.size == 1 else _reduce_all(arr, axis=None)
    if not _isfinite(s) and not np.isfinite(arr).all():
        raise NonFiniteError(f"{what}: non-finite values")


# ---------------------------------------------------------------------------
# forward kernels, shared by Tape, Raw and replay so all paths are bit-identical


def _f_matmul(a, b):
    return _dot(a, b)


def _f_add(a, b):
    return a + b


def _f_radd(a, r):
    return a + r


def _f_tanh(x):
    return np.tanh(x)


def _f_sigmoid(x):
    # tanh form avoids exp overflow for large |x|
    return 0.5 * np.tanh(0.5 * x) + 0.5


def _f_mul(a, b):
    return a * b


def _f_softmax(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _f_hconcat(parts):
    return np.concatenate(parts, axis=1)


def _f_lookup(table, ids):
    return table[list(ids), :]


def _f_ce(logits, target, weight):
    row = logits[0]
    m = row.max()
    lse = m + math.log(np.exp(row - m).sum())
    return np.array([[weight * (lse - row[target])]])


def _check_matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ: {a.shape} x {b.shape}")


def _check_same(kind, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shapes differ: {a.shape} vs {b.shape}")


def _check_radd(a, r):
    if r.shape != (1, a.shape[1]):
        raise ShapeError(f"radd: row is {r.shape}, expected (1, {a.shape[1]})")


def _check_hconcat(parts):
    if not parts:
        raise ShapeError("hconcat: needs at least one input")
    rows = parts[0].shape[0]
    for p in parts[1:]:
        if p.shape[0] != rows:
            raise ShapeError(f"hconcat: row counts differ: {[p.shape for p in parts]}")


def _check_lookup(table, ids):
    if not ids:
        raise ShapeError("lookup: empty id list")
    rows = table.shape[0]
    for i in ids:
        if not 0 <= i < rows:
            raise ShapeError(f"lookup: id {i} outside table with {rows} rows")


def _check_ce(logits, target):
    if logits.shape[0] != 1:
        raise ShapeError(f"ce: logits must be a single row, got {logits.shape}")
    if not 0 <= target < logits.shape[1]:
        raise ShapeError(f"ce: target {target} outside row of {logits.shape[1]}")


class Tape:
    """Ordered, replayable record of primitive applications.

    Node ids are dense ints. Leaves are inputs (parameters when
    requires_grad=True, constants otherwise) and may be registered at any
    point; ops consume previously recorded nodes only.
    """

    __slots__ = ("_values", "_entries", "_requires", "_leaf_ids", "_leaf_set")

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._entries: list[tuple] = []  # (kind, input ids, output id, aux)
        self._requires: list[bool] = []
        self._leaf_ids: list[int] = []
        self._leaf_set: set[int] = set()

    def __len__(self) -> int:
        return len(self._values)

    @property
    def entries(self) -> list[tuple]:
        return list(self._entries)

    def leaf(self, values, requires_grad: bool = False, check: bool = True) -> int:
        """Register an input tensor; returns its node id.

        check=False skips the finiteness gate for values the caller already
        guarantees finite (e.g. parameters maintained by clipped SGD steps).
        """
        arr = as_matrix(values)
        if check:
            _require_finite(arr, "leaf")
        nid = len(self._values)
        self._values.append(arr)
        self._requires.append(bool(requires_grad))
        self._leaf_ids.append(nid)
        self._leaf_set.add(nid)
        return nid

    def constant(self, values) -> int:
        return self.leaf(values, requires_grad=False)

    def is_leaf(self, nid: int) -> bool:
        return nid in self._leaf_set

    def value(self, nid: int) -> np.ndarray:
        """Cached forward value of a node (do not mutate)."""
        if not 0 <= nid < len(self._values):
            raise KeyError(f"node {nid} not on tape")
        return self._values[nid]

    def _record(self, kind, inputs, out, aux, requires, check):
        if check:
            _require_finite(out, kind)
        values = self._values
        nid = len(values)
        values.append(out)
        self._requires.append(requires)
        self._entries.append((kind, inputs, nid, aux))
        return nid

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: int, b: int) -> int:
        v = self._values
        va, vb = v[a], v[b]
        _check_matmul(va, vb)
        r = self._requires
        return self._record("matmul", (a, b), _dot(va, vb), None, r[a] or r[b], True)

    def add(self, a: int, b: int) -> int:
        v = self._values
        va, vb = v[a], v[b]
        _check_same("add", va, vb)
        r = self._requires
        return self._record("add", (a, b), va + vb, None, r[a] or r[b], True)

    def radd(self, a: int, row: int) -> int:
        v = self._values
        va, vr = v[a], v[row]
        _check_radd(va, vr)
        r = self._requires
        return self._record("radd", (a, row), va + vr, None, r[a] or r[row], True)

    def tanh(self, x: int) -> int:
        return self._record(
            "tanh", (x,), np.tanh(self._values[x]), None, self._requires[x], False
        )

    def sigmoid(self, x: int) -> int:
        return self._record(
            "sigmoid", (x,), _f_sigmoid(self._values[x]), None, self._requires[x], False
        )

    def mul(self, a: int, b: int) -> int:
        v = self._values
        va, vb = v[a], v[b]
        _check_same("mul", va, vb)
        r = self._requires
        return self._record("mul", (a, b), va * vb, None, r[a] or r[b], True)

    def softmax(self, x: int) -> int:
        return self._record(
            "softmax", (x,), _f_softmax(self._values[x]), None, self._requires[x], False
        )

    def hconcat(self, parts: Sequence[int]) -> int:
        parts = tuple(parts)
        vals = [self._values[p] for p in parts]
        _check_hconcat(vals)
        widths = tuple(p.shape[1] for p in vals)
        req = any(self._requires[p] for p in parts)
        return self._record("hconcat", parts, _f_hconcat(vals), widths, req, False)

    def lookup(self, table: int, ids: Sequence[int]) -> int:
        ids = tuple(int(i) for i in ids)
        vt = self._values[table]
        _check_lookup(vt, ids)
        return self._record(
            "lookup", (table,), _f_lookup(vt, ids), ids, self._requires[table], False
        )

    def ce(self, logits: int, target: int, weight: float = 1.0) -> int:
        vl = self._values[logits]
        target = int(target)
        _check_ce(vl, target)
        return self._record(
            "ce",
            (logits,),
            _f_ce(vl, target, weight),
            (target, float(weight)),
            self._requires[logits],
            True,
        )

    # -- reverse pass -------------------------------------------------------

    def backward(self, loss: int) -> dict[int, np.ndarray]:
        """Gradients of a scalar loss node w.r.t. every leaf.

        Unused leaves get zeros. Pure: repeated calls (with the same or a
        different loss node) are independent.

        Weight-gradient outer products (row input x row upstream against a
        leaf) are deferred and flushed as one stacked gemm per leaf; this
        changes only the summation order of mathematically summed terms.
        """
        v = self._values
        if not 0 <= loss < len(v):
            raise KeyError(f"loss node {loss} not on tape")
        if v[loss].shape != (1, 1):
            raise ShapeError(f"loss must be 1x1, got {v[loss].shape}")
        req = self._requires
        leaf_set = self._leaf_set
        grads: list[np.ndarray | None] = [None] * len(v)
        grads[loss] = np.ones((1, 1))
        # leaf id -> (input rows, upstream rows) awaiting one stacked gemm
        deferred: dict[int, tuple[list, list]] = {}

        for kind, inputs, out, aux in reversed(self._entries):
            g = grads[out]
            if g is None:
                continue
            if kind == "matmul":
                a, b = inputs
                if req[a]:
                    delta = _dot(g, v[b].T)
                    if grads[a] is None:
                        grads[a] = delta
                    else:
                        grads[a] += delta
                if req[b]:
                    va = v[a]
                    if va.shape[0] == 1 and b in leaf_set:
                        slot = deferred.get(b)
                        if slot is None:
                            deferred[b] = ([va], [g])
                        else:
                            slot[0].append(va)
                            slot[1].append(g)
                    else:
                        delta = _dot(va.T, g)
                        if grads[b] is None:
                            grads[b] = delta
                        else:
                            grads[b] += delta
            elif kind == "add":
                a, b = inputs
                if req[a]:
                    if grads[a] is None:
                        grads[a] = g.copy()
                    else:
                        grads[a] += g
                if req[b]:
                    if grads[b] is None:
                        grads[b] = g.copy()
                    else:
                        grads[b] += g
            elif kind == "mul":
                a, b = inputs
                if req[a]:
                    delta = g * v[b]
                    if grads[a] is None:
                        grads[a] = delta
                    else:
                        grads[a] += delta
                if req[b]:
                    delta = g * v[a]
                    if grads[b] is None:
                        grads[b] = delta
                    else:
                        grads[b] += delta
            elif kind == "radd":
                a, r = inputs
                if req[a]:
                    if grads[a] is None:
                        grads[a] = g.copy()
                    else:
                        grads[a] += g
                if req[r]:
                    delta = g if g.shape[0] == 1 else g.sum(axis=0, keepdims=True)
                    if grads[r] is None:
                        grads[r] = delta.copy()
                    else:
                        grads[r] += delta
            elif kind == "tanh":
                y = v[out]
                delta = g * (1.0 - y * y)
                x = inputs[0]
                if grads[x] is None:
                    grads[x] = delta
                else:
                    grads[x] += delta
            elif kind == "sigmoid":
                y = v[out]
                delta = g * (y * (1.0 - y))
                x = inputs[0]
                if grads[x] is None:
                    grads[x] = delta
                else:
                    grads[x] += delta
            elif kind == "hconcat":
                lo = 0
                for p, w in zip(inputs, aux):
                    if req[p]:
                        piece = g[:, lo : lo + w]
                        if grads[p] is None:
                            grads[p] = piece.copy()
                        else:
                            grads[p] += piece
                    lo += w
            elif kind == "softmax":
                y = v[out]
                inner = (g * y).sum(axis=1, keepdims=True)
                delta = y * (g - inner)
                x = inputs[0]
                if grads[x] is None:
                    grads[x] = delta
                else:
                    grads[x] += delta
            elif kind == "ce":
                target, weight = aux
                scale = weight * g[0, 0]
                delta = _f_softmax(v[inputs[0]]) * scale
                delta[0, target] -= scale
                x = inputs[0]
                if grads[x] is None:
                    grads[x] = delta
                else:
                    grads[x] += delta
            elif kind == "lookup":
                table = inputs[0]
                delta = np.zeros_like(v[table])
                np.add.at(delta, list(aux), g)
                if grads[table] is None:
                    grads[table] = delta
                else:
                    grads[table] += delta
            else:  # pragma: no cover - guarded by the op methods
                raise ValueError(f"unknown primitive on tape: {kind}")

        for b, (rows, gs) in deferred.items():
            if len(rows) == 1:
                delta = _dot(rows[0].T, gs[0])
            else:
                delta = _dot(
                    np.concatenate(rows, axis=0).T, np.concatenate(gs, axis=0)
                )
            if grads[b] is None:
                grads[b] = delta
            else:
                grads[b] += delta

        out: dict[int, np.ndarray] = {}
        for i in self._leaf_ids:
            gi = grads[i]
            if gi is None:
                gi = np.zeros_like(v[i])
            else:
                _require_finite(gi, "backward")
            out[i] = gi
        return out

    def replay(self) -> list[np.ndarray]:
        """Recompute every node from the leaves; returns all values.

        Same kernels as the recording pass, so results are bit-identical for
        identical leaves.
        """
        vals: list[np.ndarray | None] = [None] * len(self._values)
        for i in self._leaf_ids:
            vals[i] = self._values[i]
        for kind, inputs, out, aux in self._entries:
            ins = [vals[i] for i in inputs]
            if kind == "matmul":
                vals[out] = _f_matmul(*ins)
            elif kind == "add":
                vals[out] = _f_add(*ins)
            elif kind == "radd":
                vals[out] = _f_radd(*ins)
            elif kind == "tanh":
                vals[out] = _f_tanh(ins[0])
            elif kind == "sigmoid":
                vals[out] = _f_sigmoid(ins[0])
            elif kind == "mul":
                vals[out] = _f_mul(*ins)
            elif kind == "softmax":
                vals[out] = _f_softmax(ins[0])
            elif kind == "hconcat":
                vals[out] = _f_hconcat(ins)
            elif kind == "lookup":
                vals[out] = _f_lookup(ins[0], aux)
            elif kind == "ce":
                vals[out] = _f_ce(ins[0], aux[0], aux[1])
            else:  # pragma: no cover
                raise ValueError(f"unknown primitive on tape: {kind}")
        return vals  # type: ignore[return-value]


class Raw:
    """Eager executor with the Tape op surface; values are plain ndarrays.

    No recording, no finiteness gates: used for inference-only forward math
    (greedy decoding, finite-difference probes) on values that stay bounded.
    """

    @staticmethod
    def leaf(values, requires_grad: bool = False, check: bool = True) -> np.ndarray:
        return as_matrix(values)

    constant = leaf

    @staticmethod
    def value(h: np.ndarray) -> np.ndarray:
        return h

    matmul = staticmethod(_f_matmul)
    add = staticmethod(_f_add)
    radd = staticmethod(_f_radd)
    tanh = staticmethod(_f_tanh)
    sigmoid = staticmethod(_f_sigmoid)
    mul = staticmethod(_f_mul)
    softmax = staticmethod(_f_softmax)

    @staticmethod
    def hconcat(parts):
        return _f_hconcat(list(parts))

    @staticmethod
    def lookup(table, ids):
        return _f_lookup(table, tuple(int(i) for i in ids))

    @staticmethod
    def ce(logits, target, weight: float = 1.0):
        return _f_ce(logits, int(target), weight)


RAW = Raw()


def forward_primitive(tape: Tape, kind: str, inputs, **aux) -> int:
    """Apply one primitive by name on a tape; returns the output node id.

    Inputs may be node ids or raw matrices (auto-registered as leaves).
    """
    if kind not in PRIMITIVES:
        raise ValueError(f"unknown primitive {kind!r}; known: {PRIMITIVES}")
    ids = [i if isinstance(i, (int, np.integer)) else tape.leaf(i) for i in inputs]
    if kind == "hconcat":
        return tape.hconcat(ids)
    if kind == "lookup":
        return tape.lookup(ids[0], aux["ids"])
    if kind == "ce":
        return tape.ce(ids[0], aux["target"], aux.get("weight", 1.0))
    return getattr(tape, kind)(*ids)


def backward(tape: Tape, loss: int) -> dict[int, np.ndarray]:
    """Module-level alias for Tape.backward."""
    return tape.backward(loss)


def finite_diff_check(
    build_loss: Callable,
    params: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    build_loss(ex, handles) must construct a scalar loss through an executor
    (Tape for the analytic pass, Raw for probing) given one handle per
    parameter; it must be deterministic.

    Relative error per coordinate is |analytic - numeric| divided by
    max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    arrays = [as_matrix(p).astype(np.float64, copy=True) for p in params]

    tape = Tape()
    ids = [tape.leaf(a, requires_grad=True) for a in arrays]
    loss_id = build_loss(tape, ids)
    analytic = tape.backward(loss_id)

    probe = [a.copy() for a in arrays]

    def eval_loss(pi: int, ci: int) -> float:
        out = np.asarray(build_loss(RAW, probe))
        val = float(out[0, 0])
        if not math.isfinite(val):
            raise GradientCheckError(
                f"non-finite loss while probing param {pi}, coordinate {ci}", pi, ci
            )
        return val

    worst = 0.0
    for pi, arr in enumerate(probe):
        flat = arr.ravel()
        aflat = analytic[ids[pi]].ravel()
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + eps
            f_plus = eval_loss(pi, ci)
            flat[ci] = orig - eps
            f_minus = eval_loss(pi, ci)
            flat[ci] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(aflat[ci])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
    return worst


def sgd_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    clip_norm: float,
) -> dict[str, np.ndarray]:
    """One SGD update with global-norm gradient clipping (in place).

    If the global L2 norm of all grads exceeds clip_norm, grads are scaled by
    clip_norm / norm before the update p <- p - lr * grad.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    sq = 0.0
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(
                f"sgd_step: {name}: grad {g.shape} vs param {params[name].shape}"
            )
        flat = g.ravel()
        sq += float(_dot(flat, flat))
    gnorm = math.sqrt(sq)
    scale = clip_norm / gnorm if gnorm > clip_norm else 1.0
    step = lr * scale
    for name, g in grads.items():
        params[name] -= step * g
    return params
