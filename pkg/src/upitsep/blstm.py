"""Bidirectional LSTM mask estimator, written directly in numpy.

The network maps a (frames, bins) magnitude grid to ``output_sources``
masks of the same grid. Layers are standard LSTM cells (input, forget and
output gates, tanh candidate, no peepholes) run in both time directions;
the two directions' outputs are concatenated before the next layer.
Inverted dropout sits strictly between recurrent layers. The output layer
is a single linear map to all sources' bins followed by ReLU.

Everything is double precision. Parameters live in one flat float64 vector
with named block views, so the training loop can treat updates as plain
vector arithmetic and the checkpoint format can store named blocks.

``backward`` implements exact backpropagation through time for the same
graph ``forward`` evaluates; it is validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

GATE_ORDER = "ifgo"  # input, forget, candidate, output
WEIGHT_INIT_HALF_RANGE = 0.05
FORGET_BIAS_INIT = 1.0

CHECKPOINT_MAGIC = b"UPSP"
CHECKPOINT_VERSION = 1


class CheckpointFormatError(ValueError):
    """The byte stream is not a recognizable checkpoint."""


@dataclass(frozen=True)
class BlstmConfig:
    num_layers: int = 3
    cells_per_direction: int = 1280
    input_dim: int = 129
    output_sources: int = 3
    bins_per_source: int = 129
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"need at least 1 layer, got {self.num_layers}")
        if self.cells_per_direction < 1:
            raise ValueError(f"need at least 1 cell, got {self.cells_per_direction}")
        if self.input_dim < 1 or self.bins_per_source < 1:
            raise ValueError("input_dim and bins_per_source must be positive")
        if self.output_sources < 2:
            raise ValueError(f"need at least 2 output sources, got {self.output_sources}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def output_dim(self) -> int:
        return self.output_sources * self.bins_per_source

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else 2 * self.cells_per_direction


def parameter_layout(config: BlstmConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) for every parameter block."""
    h = config.cells_per_direction
    blocks: list[tuple[str, tuple[int, ...]]] = []
    for layer in range(config.num_layers):
        d = config.layer_input_dim(layer)
        for direction in ("fwd", "bwd"):
            prefix = f"layer{layer}.{direction}"
            blocks.append((f"{prefix}.W", (d, 4 * h)))
            blocks.append((f"{prefix}.U", (h, 4 * h)))
            blocks.append((f"{prefix}.b", (4 * h,)))
    blocks.append(("output.W", (2 * h, config.output_dim)))
    blocks.append(("output.b", (config.output_dim,)))
    return blocks


def parameter_count(config: BlstmConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in parameter_layout(config))


@dataclass
class BlstmNetwork:
    config: BlstmConfig
    params: np.ndarray
    views: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        expected = parameter_count(self.config)
        if self.params.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {self.params.shape}")
        if self.params.dtype != np.float64:
            raise ValueError("parameters must be float64")
        self.views = _build_views(self.config, self.params)

    @classmethod
    def initialize(cls, config: BlstmConfig, seed: int) -> "BlstmNetwork":
        """Uniform(-0.05, 0.05) weights, zero biases, forget-gate bias 1."""
        rng = np.random.default_rng(seed)
        params = np.zeros(parameter_count(config))
        net = cls(config, params)
        h = config.cells_per_direction
        for name, view in net.views.items():
            if name.endswith(".W") or name.endswith(".U"):
                view[...] = rng.uniform(
                    -WEIGHT_INIT_HALF_RANGE, WEIGHT_INIT_HALF_RANGE, size=view.shape
                )
            elif name.endswith(".b") and name != "output.b":
                view[h : 2 * h] = FORGET_BIAS_INIT
        return net


def _build_views(config: BlstmConfig, params: np.ndarray) -> dict[str, np.ndarray]:
    views = {}
    offset = 0
    for name, shape in parameter_layout(config):
        size = int(np.prod(shape))
        views[name] = params[offset : offset + size].reshape(shape)
        offset += size
    return views


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Numerically safe in both tails.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _scan(x: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray) -> dict:
    """Run one LSTM direction over (frames, in_dim) input; returns all
    per-step quantities needed for the backward pass."""
    k = x.shape[0]
    h_dim = u.shape[0]
    pre = x @ w + b  # input contribution, batched over time
    gates_i = np.empty((k, h_dim))
    gates_f = np.empty((k, h_dim))
    gates_g = np.empty((k, h_dim))
    gates_o = np.empty((k, h_dim))
    cells = np.empty((k, h_dim))
    tanh_c = np.empty((k, h_dim))
    hidden = np.empty((k, h_dim))
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in range(k):
        z = pre[t] + h_prev @ u
        i = _sigmoid(z[:h_dim])
        f = _sigmoid(z[h_dim : 2 * h_dim])
        g = np.tanh(z[2 * h_dim : 3 * h_dim])
        o = _sigmoid(z[3 * h_dim :])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        gates_i[t] = i
        gates_f[t] = f
        gates_g[t] = g
        gates_o[t] = o
        cells[t] = c
        tanh_c[t] = tc
        hidden[t] = h
        h_prev = h
        c_prev = c
    return {
        "x": x,
        "i": gates_i,
        "f": gates_f,
        "g": gates_g,
        "o": gates_o,
        "c": cells,
        "tanh_c": tanh_c,
        "h": hidden,
    }


def _scan_backward(
    scan: dict, u: np.ndarray, w: np.ndarray, dh_in: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT through one direction. Returns (dx, dW, dU, db)."""
    k, h_dim = scan["h"].shape
    i, f, g, o = scan["i"], scan["f"], scan["g"], scan["o"]
    c, tc = scan["c"], scan["tanh_c"]
    d_gates = np.empty((k, 4 * h_dim))
    dh_next = np.zeros(h_dim)
    dc_next = np.zeros(h_dim)
    for t in range(k - 1, -1, -1):
        dh = dh_in[t] + dh_next
        do = dh * tc[t]
        dc = dh * o[t] * (1.0 - tc[t] ** 2) + dc_next
        c_prev = c[t - 1] if t > 0 else 0.0
        di = dc * g[t]
        df = dc * c_prev
        dg = dc * i[t]
        dc_next = dc * f[t]
        d_gates[t, :h_dim] = di * i[t] * (1.0 - i[t])
        d_gates[t, h_dim : 2 * h_dim] = df * f[t] * (1.0 - f[t])
        d_gates[t, 2 * h_dim : 3 * h_dim] = dg * (1.0 - g[t] ** 2)
        d_gates[t, 3 * h_dim :] = do * o[t] * (1.0 - o[t])
        dh_next = d_gates[t] @ u.T
    h_prev = np.vstack([np.zeros((1, h_dim)), scan["h"][:-1]])
    dw = scan["x"].T @ d_gates
    du = h_prev.T @ d_gates
    db = d_gates.sum(axis=0)
    dx = d_gates @ w.T
    return dx, dw, du, db


def forward(
    net: BlstmNetwork,
    features: np.ndarray,
    train_mode: bool = False,
    dropout_seed: int = 0,
) -> tuple[np.ndarray, dict]:
    """Estimate masks for a (frames, input_dim) feature grid.

    Returns (masks, cache): masks is (output_sources, frames, bins); the
    cache feeds ``backward``. In train mode, inverted dropout with the
    given seed is applied between recurrent layers; inference applies none.
    The output is deterministic given (params, features, dropout_seed).
    """
    cfg = net.config
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ValueError(f"expected (frames, {cfg.input_dim}) features, got {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("empty feature grid")
    rng = np.random.default_rng(dropout_seed) if train_mode else None
    layers = []
    for layer in range(cfg.num_layers):
        wf = net.views[f"layer{layer}.fwd.W"]
        uf = net.views[f"layer{layer}.fwd.U"]
        bf = net.views[f"layer{layer}.fwd.b"]
        wb = net.views[f"layer{layer}.bwd.W"]
        ub = net.views[f"layer{layer}.bwd.U"]
        bb = net.views[f"layer{layer}.bwd.b"]
        scan_f = _scan(x, wf, uf, bf)
        scan_b = _scan(x[::-1], wb, ub, bb)
        h = np.concatenate([scan_f["h"], scan_b["h"][::-1]], axis=1)
        drop_mask = None
        if layer < cfg.num_layers - 1 and train_mode and cfg.dropout_rate > 0.0:
            keep = 1.0 - cfg.dropout_rate
            drop_mask = (rng.random(h.shape) >= cfg.dropout_rate) / keep
            h = h * drop_mask
        layers.append({"scan_f": scan_f, "scan_b": scan_b, "drop_mask": drop_mask})
        x = h
    z = x @ net.views["output.W"] + net.views["output.b"]
    masks_flat = np.maximum(z, 0.0)
    k = z.shape[0]
    masks = masks_flat.reshape(k, cfg.output_sources, cfg.bins_per_source)
    masks = np.ascontiguousarray(np.transpose(masks, (1, 0, 2)))
    cache = {"layers": layers, "z": z, "last_hidden": x, "train_mode": train_mode}
    return masks, cache


def backward(net: BlstmNetwork, cache: dict, mask_gradients: np.ndarray) -> np.ndarray:
    """Exact gradient of the loss wrt every parameter, as a flat vector.

    ``mask_gradients`` is dLoss/dMasks with the same (sources, frames,
    bins) shape the forward pass returned.
    """
    cfg = net.config
    z = cache["z"]
    k = z.shape[0]
    g = np.asarray(mask_gradients, dtype=np.float64)
    if g.shape != (cfg.output_sources, k, cfg.bins_per_source):
        raise ValueError(
            f"expected gradients of shape {(cfg.output_sources, k, cfg.bins_per_source)},"
            f" got {g.shape}"
        )
    grads = np.zeros_like(net.params)
    grad_views = _build_views(cfg, grads)

    dz = np.transpose(g, (1, 0, 2)).reshape(k, cfg.output_dim) * (z > 0.0)
    grad_views["output.W"][...] = cache["last_hidden"].T @ dz
    grad_views["output.b"][...] = dz.sum(axis=0)
    dh = dz @ net.views["output.W"].T

    h = cfg.cells_per_direction
    for layer in range(cfg.num_layers - 1, -1, -1):
        entry = cache["layers"][layer]
        if entry["drop_mask"] is not None:
            dh = dh * entry["drop_mask"]
        dx_f, dw_f, du_f, db_f = _scan_backward(
            entry["scan_f"],
            net.views[f"layer{layer}.fwd.U"],
            net.views[f"layer{layer}.fwd.W"],
            dh[:, :h],
        )
        dx_b, dw_b, du_b, db_b = _scan_backward(
            entry["scan_b"],
            net.views[f"layer{layer}.bwd.U"],
            net.views[f"layer{layer}.bwd.W"],
            dh[:, h:][::-1],
        )
        grad_views[f"layer{layer}.fwd.W"][...] = dw_f
        grad_views[f"layer{layer}.fwd.U"][...] = du_f
        grad_views[f"layer{layer}.fwd.b"][...] = db_f
        grad_views[f"layer{layer}.bwd.W"][...] = dw_b
        grad_views[f"layer{layer}.bwd.U"][...] = du_b
        grad_views[f"layer{layer}.bwd.b"][...] = db_b
        dh = dx_f + dx_b[::-1]
    return grads


def direction_swapped(net: BlstmNetwork) -> BlstmNetwork:
    """Network that computes the time-reversed function of ``net``.

    Swaps forward/backward parameter blocks in every layer; because the
    direction outputs are concatenated [fwd, bwd], the swap also exchanges
    the corresponding input-column halves of later layers and the row
    halves of the output map. For any input x (inference mode):
    forward(swapped, reverse(x)) == reverse(forward(net, x)).
    """
    cfg = net.config
    out = BlstmNetwork(cfg, net.params.copy())
    h = cfg.cells_per_direction
    for layer in range(cfg.num_layers):
        for suffix in ("W", "U", "b"):
            f_name = f"layer{layer}.fwd.{suffix}"
            b_name = f"layer{layer}.bwd.{suffix}"
            f_block = net.views[f_name].copy()
            b_block = net.views[b_name].copy()
            if suffix == "W" and layer > 0:
                f_block = np.vstack([f_block[h:], f_block[:h]])
                b_block = np.vstack([b_block[h:], b_block[:h]])
            out.views[f_name][...] = b_block
            out.views[b_name][...] = f_block
    w_out = net.views["output.W"]
    out.views["output.W"][...] = np.vstack([w_out[h:], w_out[:h]])
    return out


def save_checkpoint(
    net: BlstmNetwork, path, schedule_state: dict | None = None
) -> None:
    """Write a self-describing binary checkpoint.

    Layout: 4-byte magic, uint32 version, uint64 header length, JSON header
    (config, schedule state, named block table), contiguous little-endian
    float64 parameter data.
    """
    header = {
        "config": {
            "num_layers": net.config.num_layers,
            "cells_per_direction": net.config.cells_per_direction,
            "input_dim": net.config.input_dim,
            "output_sources": net.config.output_sources,
            "bins_per_source": net.config.bins_per_source,
            "dropout_rate": net.config.dropout_rate,
        },
        "schedule_state": schedule_state,
        "dtype": "<f8",
        "blocks": [
            {"name": name, "shape": list(shape)}
            for name, shape in parameter_layout(net.config)
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    buf.write(struct.pack("<Q", len(header_bytes)))
    buf.write(header_bytes)
    buf.write(net.params.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[BlstmNetwork, dict | None]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad magic: not a checkpoint file")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + header_len:
        raise CheckpointFormatError("truncated header")
    header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    config = BlstmConfig(**header["config"])
    data = blob[16 + header_len :]
    expected = parameter_count(config) * 8
    if len(data) != expected:
        raise CheckpointFormatError(
            f"parameter payload is {len(data)} bytes, expected {expected}"
        )
    params = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return BlstmNetwork(config, params), header["schedule_state"]


def inverted_dropout(x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Standalone inverted dropout (exposed for expectation testing)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = 1.0 - rate
    return x * ((rng.random(x.shape) >= rate) / keep)
