"""Single-timestep LSTM and GRU memory cells with hand-derived backward passes.

Forward passes follow the standard gate equations

    LSTM:  f = sig(b_f + V_f x + W_f h_prev)        (same form for i, o)
           c~ = act(b_c + V_c x + W_c h_prev)
           c  = f * c_prev + i * c~
           h  = act(c) * o

    GRU:   r = sig(b_r + V_r x + W_r h_prev)        (same form for z)
           h~ = act(b_c + V_c x + W_c (r * h_prev))
           h  = (1 - z) * h_prev + z * h~

where `act` is tanh (default) or relu, chosen per layer; gates are always
sigmoid.  Weight shapes: V_* is (units, input_dim), W_* is (units, units),
b_* is (units,).

All operations accept a single vector (1-D) or a batch (2-D, batch-first)
and are pure: given the same params and inputs the outputs are bitwise
identical.  Backward passes are exact analytic gradients of the equations
above; they are verified against central finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .numerics import FLOAT, ShapeError, relu, sigmoid, sigmoid_grad, tanh

LSTM_GATES = ("f", "i", "o", "c")
GRU_GATES = ("r", "z", "c")
ACTIVATIONS = ("tanh", "relu")


def _apply_activation(name: str, pre: np.ndarray):
    """Return (value, d value / d pre) for the candidate activation."""
    if name == "tanh":
        out = tanh(pre)
        return out, 1.0 - out * out
    if name == "relu":
        return relu(pre), (pre > 0.0).astype(FLOAT)
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


def _gate_tensor_specs(gates, input_dim, units):
    for g in gates:
        yield f"v_{g}", (units, input_dim)
        yield f"w_{g}", (units, units)
        yield f"b_{g}", (units,)


class _ParamsBase:
    """Shared helpers for the per-gate weight containers (also used for grads)."""

    GATES: tuple[str, ...] = ()

    @property
    def units(self) -> int:
        return getattr(self, f"b_{self.GATES[0]}").shape[0]

    @property
    def input_dim(self) -> int:
        return getattr(self, f"v_{self.GATES[0]}").shape[1]

    def tensors(self):
        """Yield (name, array) in a fixed order: per gate V, W, b."""
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def copy(self):
        return type(self)(*(getattr(self, f.name).copy() for f in fields(self)))

    def validate(self):
        units, input_dim = self.units, self.input_dim
        for name, expected in _gate_tensor_specs(self.GATES, input_dim, units):
            arr = getattr(self, name)
            if arr.shape != expected:
                raise ShapeError(f"{type(self).__name__}.{name}: shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{type(self).__name__}.{name} contains non-finite entries")
        return self

    @classmethod
    def zeros(cls, input_dim: int, units: int):
        arrs = [np.zeros(shape, dtype=FLOAT)
                for _, shape in _gate_tensor_specs(cls.GATES, input_dim, units)]
        return cls(*arrs)

    @classmethod
    def init(cls, rng, input_dim: int, units: int):
        """Glorot-uniform V and W, zero biases.

        Draw order is fixed (per gate: V then W) so a seed pins the weights.
        """
        from .numerics import glorot_uniform

        arrs = []
        for name, shape in _gate_tensor_specs(cls.GATES, input_dim, units):
            if name.startswith("b_"):
                arrs.append(np.zeros(shape, dtype=FLOAT))
            elif name.startswith("v_"):
                arrs.append(glorot_uniform(rng, input_dim, units))
            else:
                arrs.append(glorot_uniform(rng, units, units))
        return cls(*arrs)


@dataclass
class LstmParams(_ParamsBase):
    v_f: np.ndarray
    w_f: np.ndarray
    b_f: np.ndarray
    v_i: np.ndarray
    w_i: np.ndarray
    b_i: np.ndarray
    v_o: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    v_c: np.ndarray
    w_c: np.ndarray
    b_c: np.ndarray

    GATES = LSTM_GATES


@dataclass
class GruParams(_ParamsBase):
    v_r: np.ndarray
    w_r: np.ndarray
    b_r: np.ndarray
    v_z: np.ndarray
    w_z: np.ndarray
    b_z: np.ndarray
    v_c: np.ndarray
    w_c: np.ndarray
    b_c: np.ndarray

    GATES = GRU_GATES


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, units: int, batch: int | None = None):
        shape = (units,) if batch is None else (batch, units)
        return cls(np.zeros(shape, dtype=FLOAT), np.zeros(shape, dtype=FLOAT))


@dataclass
class GruState:
    h: np.ndarray

    @classmethod
    def zeros(cls, units: int, batch: int | None = None):
        shape = (units,) if batch is None else (batch, units)
        return cls(np.zeros(shape, dtype=FLOAT))


@dataclass
class CellTape:
    """Cached forward values for one timestep, consumed by the backward pass."""

    kind: str                    # "lstm" or "gru"
    x: np.ndarray
    h_prev: np.ndarray
    gates: dict                  # post-activation gate values and candidates
    c_prev: np.ndarray | None = None
    c: np.ndarray | None = None
    act_c: np.ndarray | None = None      # act(c), LSTM hidden-path value
    dact_c: np.ndarray | None = None     # d act(c)/dc
    dact_cand: np.ndarray | None = None  # d act(pre)/dpre at the candidate
    rh: np.ndarray | None = None         # r * h_prev (GRU candidate input)


def _as_batch(a, dim, what) -> tuple[np.ndarray, bool]:
    a = np.asarray(a, dtype=FLOAT)
    if a.ndim == 1:
        a = a[None, :]
        squeezed = True
    elif a.ndim == 2:
        squeezed = False
    else:
        raise ShapeError(f"{what}: expected 1-D or 2-D, got ndim={a.ndim}")
    if a.shape[1] != dim:
        raise ShapeError(f"{what}: last dim {a.shape[1]}, expected {dim}")
    return a, squeezed


def lstm_forward(params: LstmParams, x_t, prev: LstmState, activation: str = "tanh"):
    """One LSTM step. Returns (LstmState, CellTape)."""
    x, sq = _as_batch(x_t, params.input_dim, "x_t")
    h_prev, _ = _as_batch(prev.h, params.units, "prev.h")
    c_prev, _ = _as_batch(prev.c, params.units, "prev.c")
    if x.shape[0] != h_prev.shape[0] or h_prev.shape != c_prev.shape:
        raise ShapeError("lstm_forward: batch dims of x, h, c disagree")

    f = sigmoid(x @ params.v_f.T + h_prev @ params.w_f.T + params.b_f)
    i = sigmoid(x @ params.v_i.T + h_prev @ params.w_i.T + params.b_i)
    o = sigmoid(x @ params.v_o.T + h_prev @ params.w_o.T + params.b_o)
    pre_c = x @ params.v_c.T + h_prev @ params.w_c.T + params.b_c
    c_tilde, dact_cand = _apply_activation(activation, pre_c)

    c = f * c_prev + i * c_tilde
    act_c, dact_c = _apply_activation(activation, c)
    h = act_c * o

    tape = CellTape(
        kind="lstm", x=x, h_prev=h_prev, c_prev=c_prev,
        gates={"f": f, "i": i, "o": o, "c_tilde": c_tilde},
        c=c, act_c=act_c, dact_c=dact_c, dact_cand=dact_cand,
    )
    if sq:
        return LstmState(h[0], c[0]), tape
    return LstmState(h, c), tape


def lstm_backward(tape: CellTape, params: LstmParams, dh, dc=None):
    """Backward through one LSTM step.

    dh, dc are dL/dh_t and dL/dc_t (dc may be None for the last step).
    Returns (LstmParams gradients, dx, dh_prev, dc_prev).
    """
    if tape.kind != "lstm":
        raise ShapeError(f"lstm_backward: tape of kind {tape.kind!r}")
    dh, sq = _as_batch(dh, params.units, "dh")
    if dc is None:
        dc_in = np.zeros_like(dh)
    else:
        dc_in, _ = _as_batch(dc, params.units, "dc")

    f, i, o = tape.gates["f"], tape.gates["i"], tape.gates["o"]
    c_tilde = tape.gates["c_tilde"]

    d_o = dh * tape.act_c
    dcell = dc_in + dh * o * tape.dact_c
    d_f = dcell * tape.c_prev
    d_i = dcell * c_tilde
    d_cand = dcell * i
    dc_prev = dcell * f

    dpre_f = d_f * sigmoid_grad(f)
    dpre_i = d_i * sigmoid_grad(i)
    dpre_o = d_o * sigmoid_grad(o)
    dpre_c = d_cand * tape.dact_cand

    grads = LstmParams(
        v_f=dpre_f.T @ tape.x, w_f=dpre_f.T @ tape.h_prev, b_f=dpre_f.sum(axis=0),
        v_i=dpre_i.T @ tape.x, w_i=dpre_i.T @ tape.h_prev, b_i=dpre_i.sum(axis=0),
        v_o=dpre_o.T @ tape.x, w_o=dpre_o.T @ tape.h_prev, b_o=dpre_o.sum(axis=0),
        v_c=dpre_c.T @ tape.x, w_c=dpre_c.T @ tape.h_prev, b_c=dpre_c.sum(axis=0),
    )
    dx = dpre_f @ params.v_f + dpre_i @ params.v_i + dpre_o @ params.v_o + dpre_c @ params.v_c
    dh_prev = dpre_f @ params.w_f + dpre_i @ params.w_i + dpre_o @ params.w_o + dpre_c @ params.w_c
    if sq:
        return grads, dx[0], dh_prev[0], dc_prev[0]
    return grads, dx, dh_prev, dc_prev


def gru_forward(params: GruParams, x_t, prev: GruState, activation: str = "tanh"):
    """One GRU step. Returns (GruState, CellTape)."""
    x, sq = _as_batch(x_t, params.input_dim, "x_t")
    h_prev, _ = _as_batch(prev.h, params.units, "prev.h")
    if x.shape[0] != h_prev.shape[0]:
        raise ShapeError("gru_forward: batch dims of x and h disagree")

    r = sigmoid(x @ params.v_r.T + h_prev @ params.w_r.T + params.b_r)
    z = sigmoid(x @ params.v_z.T + h_prev @ params.w_z.T + params.b_z)
    rh = r * h_prev
    pre_c = x @ params.v_c.T + rh @ params.w_c.T + params.b_c
    h_tilde, dact_cand = _apply_activation(activation, pre_c)
    h = (1.0 - z) * h_prev + z * h_tilde

    tape = CellTape(
        kind="gru", x=x, h_prev=h_prev,
        gates={"r": r, "z": z, "h_tilde": h_tilde},
        rh=rh, dact_cand=dact_cand,
    )
    if sq:
        return GruState(h[0]), tape
    return GruState(h), tape


def gru_backward(tape: CellTape, params: GruParams, dh):
    """Backward through one GRU step. Returns (GruParams grads, dx, dh_prev)."""
    if tape.kind != "gru":
        raise ShapeError(f"gru_backward: tape of kind {tape.kind!r}")
    dh, sq = _as_batch(dh, params.units, "dh")

    r, z, h_tilde = tape.gates["r"], tape.gates["z"], tape.gates["h_tilde"]

    d_z = dh * (h_tilde - tape.h_prev)
    d_cand = dh * z
    dpre_c = d_cand * tape.dact_cand
    d_rh = dpre_c @ params.w_c
    d_r = d_rh * tape.h_prev

    dpre_r = d_r * sigmoid_grad(r)
    dpre_z = d_z * sigmoid_grad(z)

    grads = GruParams(
        v_r=dpre_r.T @ tape.x, w_r=dpre_r.T @ tape.h_prev, b_r=dpre_r.sum(axis=0),
        v_z=dpre_z.T @ tape.x, w_z=dpre_z.T @ tape.h_prev, b_z=dpre_z.sum(axis=0),
        v_c=dpre_c.T @ tape.x, w_c=dpre_c.T @ tape.rh, b_c=dpre_c.sum(axis=0),
    )
    dx = dpre_r @ params.v_r + dpre_z @ params.v_z + dpre_c @ params.v_c
    dh_prev = dh * (1.0 - z) + dpre_r @ params.w_r + dpre_z @ params.w_z + d_rh * r
    if sq:
        return grads, dx[0], dh_prev[0]
    return grads, dx, dh_prev
