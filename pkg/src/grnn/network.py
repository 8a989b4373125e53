"""Stacked recurrent networks with a linear head and full BPTT.

A network is an ordered stack of LSTM/GRU layers (hybrids freely mix the
two; a "single-layer" GRU-LSTM hybrid is the two-layer stack [GRU, LSTM])
followed by one dense linear unit applied to the top layer's hidden state
at the final timestep.  Initial hidden/cell states are zero for every
window; windows are independent samples, not a continuous stream.

`forward` runs one window, `forward_batch` a (batch, lookback, features)
stack of windows; both record a ForwardTape that `backward` consumes to
produce exact gradients for every parameter, summed over timesteps.

Checkpoints are a single self-describing file: a JSON header line (format
version, layer kinds/units/activations, optional metadata such as lookback
and feature names, tensor manifest) followed by the raw float64
little-endian tensor data.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cells import (
    CellTape,
    GruParams,
    GruState,
    LstmParams,
    LstmState,
    gru_backward,
    gru_forward,
    lstm_backward,
    lstm_forward,
)
from .numerics import FLOAT, Rng, ShapeError, glorot_uniform

MODEL_FORMAT = "grnn-model"
MODEL_VERSION = 1

CELL_KINDS = ("lstm", "gru")


class ModelFormatError(ValueError):
    """Checkpoint file is not a readable model of a supported version."""


@dataclass(frozen=True)
class LayerSpec:
    cell_kind: str          # "lstm" | "gru"
    units: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"cell_kind must be one of {CELL_KINDS}, got {self.cell_kind!r}")
        if self.units < 1:
            raise ValueError(f"units must be >= 1, got {self.units}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_dim: int
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a network needs at least one recurrent layer")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")

    def layer_input_dims(self):
        """Input width of each layer: features, then the previous layer's units."""
        dims = [self.input_dim]
        for spec in self.layers[:-1]:
            dims.append(spec.units)
        return dims


@dataclass
class NetworkParams:
    """All weights of a network; the same container carries gradients."""

    layers: list
    head_w: np.ndarray     # (output_dim, top_units)
    head_b: np.ndarray     # (output_dim,)

    @classmethod
    def init(cls, spec: NetworkSpec, rng: Rng) -> "NetworkParams":
        """Glorot-uniform weights, zero biases; draw order is fixed by the spec."""
        layers = []
        for layer, in_dim in zip(spec.layers, spec.layer_input_dims()):
            klass = LstmParams if layer.cell_kind == "lstm" else GruParams
            layers.append(klass.init(rng, in_dim, layer.units))
        top = spec.layers[-1].units
        head_w = glorot_uniform(rng, top, spec.output_dim)
        head_b = np.zeros(spec.output_dim, dtype=FLOAT)
        return cls(layers, head_w, head_b)

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "NetworkParams":
        layers = []
        for layer, in_dim in zip(spec.layers, spec.layer_input_dims()):
            klass = LstmParams if layer.cell_kind == "lstm" else GruParams
            layers.append(klass.zeros(in_dim, layer.units))
        top = spec.layers[-1].units
        return cls(layers, np.zeros((spec.output_dim, top), dtype=FLOAT),
                   np.zeros(spec.output_dim, dtype=FLOAT))

    def tensors(self):
        """Yield (name, array) for every parameter tensor, in a fixed order."""
        for idx, layer in enumerate(self.layers):
            for name, arr in layer.tensors():
                yield f"layer{idx}.{name}", arr
        yield "head.w", self.head_w
        yield "head.b", self.head_b

    def copy(self) -> "NetworkParams":
        return NetworkParams([p.copy() for p in self.layers],
                             self.head_w.copy(), self.head_b.copy())

    def validate(self, spec: NetworkSpec) -> "NetworkParams":
        if len(self.layers) != len(spec.layers):
            raise ShapeError("params/spec layer count mismatch")
        for lp, ls, in_dim in zip(self.layers, spec.layers, spec.layer_input_dims()):
            expected = LstmParams if ls.cell_kind == "lstm" else GruParams
            if not isinstance(lp, expected):
                raise ShapeError(f"expected {expected.__name__}, got {type(lp).__name__}")
            if lp.units != ls.units or lp.input_dim != in_dim:
                raise ShapeError(f"layer dims ({lp.units},{lp.input_dim}) != spec ({ls.units},{in_dim})")
            lp.validate()
        if self.head_w.shape != (spec.output_dim, spec.layers[-1].units):
            raise ShapeError(f"head_w shape {self.head_w.shape}")
        return self


NetworkGrads = NetworkParams


@dataclass
class ForwardTape:
    """Per-timestep, per-layer cell tapes plus what the head saw."""

    steps: list                       # steps[t][l] -> CellTape
    h_last: np.ndarray                # (batch, top_units), head input
    predictions: np.ndarray           # (batch, output_dim)

    def __len__(self):
        return len(self.steps) * (len(self.steps[0]) if self.steps else 0)


def _check_windows(spec: NetworkSpec, windows: np.ndarray) -> np.ndarray:
    windows = np.asarray(windows, dtype=FLOAT)
    if windows.ndim != 3:
        raise ShapeError(f"windows: expected (batch, lookback, features), got {windows.shape}")
    if windows.shape[2] != spec.input_dim:
        raise ShapeError(f"windows feature dim {windows.shape[2]} != input_dim {spec.input_dim}")
    if windows.shape[1] < 1:
        raise ShapeError("lookback must be >= 1")
    return windows


def forward_batch(spec: NetworkSpec, params: NetworkParams, windows) -> tuple[np.ndarray, ForwardTape]:
    """Run a (batch, lookback, features) stack of windows. Returns (preds, tape)."""
    windows = _check_windows(spec, windows)
    batch, lookback, _ = windows.shape

    states = []
    for layer in spec.layers:
        if layer.cell_kind == "lstm":
            states.append(LstmState.zeros(layer.units, batch))
        else:
            states.append(GruState.zeros(layer.units, batch))

    steps: list[list[CellTape]] = []
    for t in range(lookback):
        inp = windows[:, t, :]
        taps = []
        for l, layer in enumerate(spec.layers):
            if layer.cell_kind == "lstm":
                states[l], tape = lstm_forward(params.layers[l], inp, states[l], layer.activation)
            else:
                states[l], tape = gru_forward(params.layers[l], inp, states[l], layer.activation)
            taps.append(tape)
            inp = states[l].h
        steps.append(taps)

    h_last = states[-1].h
    preds = h_last @ params.head_w.T + params.head_b
    return preds, ForwardTape(steps=steps, h_last=h_last, predictions=preds)


def forward(spec: NetworkSpec, params: NetworkParams, window) -> tuple[np.ndarray, ForwardTape]:
    """Run a single (lookback, features) window. Returns (prediction vector, tape)."""
    window = np.asarray(window, dtype=FLOAT)
    if window.ndim != 2:
        raise ShapeError(f"window: expected (lookback, features), got shape {window.shape}")
    preds, tape = forward_batch(spec, params, window[None, :, :])
    return preds[0], tape


def predict_batch(spec: NetworkSpec, params: NetworkParams, windows) -> np.ndarray:
    """Predictions for many windows, no tapes retained. Returns (n, output_dim)."""
    windows = np.asarray(windows, dtype=FLOAT)
    if windows.size == 0:
        return np.zeros((0, spec.output_dim), dtype=FLOAT)
    preds, _ = forward_batch(spec, params, windows)
    return preds


def mse_loss(pred, target) -> float:
    """Mean squared error between two equal-length vectors."""
    pred = np.asarray(pred, dtype=FLOAT).ravel()
    target = np.asarray(target, dtype=FLOAT).ravel()
    if pred.shape != target.shape or pred.size == 0:
        raise ShapeError(f"mse_loss: shapes {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def _accumulate(acc, delta) -> None:
    for (_, a), (_, d) in zip(acc.tensors(), delta.tensors()):
        a += d


def backward(spec: NetworkSpec, params: NetworkParams, tape: ForwardTape, dpred) -> NetworkGrads:
    """Full-unrolled BPTT from dL/dprediction; gradients summed over timesteps."""
    dpred = np.asarray(dpred, dtype=FLOAT)
    if dpred.ndim == 1:
        dpred = dpred[None, :]
    batch = tape.h_last.shape[0]
    if dpred.shape != (batch, spec.output_dim):
        raise ShapeError(f"dpred shape {dpred.shape}, expected {(batch, spec.output_dim)}")

    grads = NetworkParams.zeros(spec)
    grads.head_w += dpred.T @ tape.h_last
    grads.head_b += dpred.sum(axis=0)

    n_layers = len(spec.layers)
    dh_rec = [np.zeros((batch, l.units), dtype=FLOAT) for l in spec.layers]
    dc_rec = [np.zeros((batch, l.units), dtype=FLOAT) if l.cell_kind == "lstm" else None
              for l in spec.layers]
    head_dh = dpred @ params.head_w

    for t in reversed(range(len(tape.steps))):
        carry = head_dh if t == len(tape.steps) - 1 else None
        for l in reversed(range(n_layers)):
            dh = dh_rec[l] if carry is None else dh_rec[l] + carry
            cell_tape = tape.steps[t][l]
            if spec.layers[l].cell_kind == "lstm":
                g, dx, dh_prev, dc_prev = lstm_backward(cell_tape, params.layers[l], dh, dc_rec[l])
                dc_rec[l] = dc_prev
            else:
                g, dx, dh_prev = gru_backward(cell_tape, params.layers[l], dh)
            _accumulate(grads.layers[l], g)
            dh_rec[l] = dh_prev
            carry = dx      # feeds the layer below at this same timestep
    return grads


def save_model(path, spec: NetworkSpec, params: NetworkParams, extra: dict | None = None) -> None:
    """Write a self-describing checkpoint; see the module docstring for the layout."""
    params.validate(spec)
    manifest = [{"name": name, "shape": list(arr.shape)} for name, arr in params.tensors()]
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "output_dim": spec.output_dim,
            "layers": [
                {"kind": l.cell_kind, "units": l.units, "activation": l.activation}
                for l in spec.layers
            ],
        },
        "extra": extra or {},
        "tensors": manifest,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in params.tensors():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> tuple[NetworkSpec, NetworkParams, dict]:
    """Read a checkpoint written by save_model. Returns (spec, params, extra)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: format {header.get('format')!r} is not {MODEL_FORMAT!r}")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: version {header.get('version')!r}, expected {MODEL_VERSION}")

    spec = NetworkSpec(
        layers=tuple(LayerSpec(l["kind"], l["units"], l["activation"])
                     for l in header["spec"]["layers"]),
        input_dim=header["spec"]["input_dim"],
        output_dim=header["spec"]["output_dim"],
    )
    params = NetworkParams.zeros(spec)
    offset = 0
    by_name = dict(params.tensors())
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        target = by_name.get(entry["name"])
        if target is None or target.shape != shape:
            raise ModelFormatError(f"{path}: unexpected tensor {entry['name']} {shape}")
        target[...] = arr
    if offset != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    params.validate(spec)
    return spec, params, header.get("extra", {})
