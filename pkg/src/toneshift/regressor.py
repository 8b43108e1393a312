"""The trainable sequence regressor.

Architecture: a fully connected projection of the 768-d text embedding,
concatenation with the per-message tone and author flag, a GRU stack
(1-2 layers, optionally bidirectional), and a final linear head that maps
the last hidden state to a scalar prediction.  Forward pass and analytic
backpropagation through time are implemented directly on numpy arrays so
gradients can be checked against finite differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteActivation

EMBED_DIM = 768
SEQ_CAP = 64
FEATURE_EXTRA = 2  # tone + author flag


@dataclass(frozen=True)
class ModelConfig:
    fc_out: int = 62
    num_layers: int = 2
    bidirectional: bool = False
    dropout: float = 0.0
    seq_cap: int = SEQ_CAP

    def __post_init__(self):
        if self.num_layers not in (1, 2):
            raise ValueError("num_layers must be 1 or 2")
        if self.num_layers == 1 and self.dropout != 0.0:
            raise ValueError("dropout requires 2 layers")
        if (self.fc_out + FEATURE_EXTRA) % 2 != 0:
            raise ValueError("input_dim must be even so hidden_dim is exactly half")

    @property
    def input_dim(self) -> int:
        return self.fc_out + FEATURE_EXTRA

    @property
    def hidden_dim(self) -> int:
        return self.input_dim // 2

    @property
    def num_directions(self) -> int:
        return 2 if self.bidirectional else 1


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def param_order(config: ModelConfig) -> list[str]:
    names = ["fc1_w", "fc1_b"]
    for layer in range(config.num_layers):
        for d in range(config.num_directions):
            prefix = f"gru_l{layer}d{d}"
            names += [f"{prefix}_w_ih", f"{prefix}_w_hh", f"{prefix}_b_ih", f"{prefix}_b_hh"]
    names += ["fc2_w", "fc2_b"]
    return names


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    h = config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {
        "fc1_w": (config.fc_out, EMBED_DIM),
        "fc1_b": (config.fc_out,),
    }
    for layer in range(config.num_layers):
        in_dim = config.input_dim if layer == 0 else h * config.num_directions
        for d in range(config.num_directions):
            prefix = f"gru_l{layer}d{d}"
            shapes[f"{prefix}_w_ih"] = (3 * h, in_dim)
            shapes[f"{prefix}_w_hh"] = (3 * h, h)
            shapes[f"{prefix}_b_ih"] = (3 * h,)
            shapes[f"{prefix}_b_hh"] = (3 * h,)
    shapes["fc2_w"] = (1, h * config.num_directions)
    shapes["fc2_b"] = (1,)
    return shapes


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Uniform +-1/sqrt(fan_in) initialization per tensor, seeded."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    shapes = param_shapes(config)
    for name in param_order(config):
        shape = shapes[name]
        fan_in = shape[-1] if len(shape) > 1 else shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def build_input(raw: np.ndarray, fc1_w: np.ndarray, fc1_b: np.ndarray) -> np.ndarray:
    """Project raw features (..., 770) to the model input (..., fc_out + 2).

    The first 768 raw entries are the embedding; the last two (tone, flag)
    pass through unchanged.
    """
    if raw.shape[-1] != EMBED_DIM + FEATURE_EXTRA:
        raise DimensionMismatch(
            f"raw feature dim {raw.shape[-1]} != {EMBED_DIM + FEATURE_EXTRA}"
        )
    proj = raw[..., :EMBED_DIM] @ fc1_w.T + fc1_b
    return np.concatenate([proj, raw[..., EMBED_DIM:]], axis=-1)


def reverse_padded(arr: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Reverse each sequence within its valid length; pads become zero.

    Involutive on the valid region, which makes it its own gradient.
    """
    batch, steps = arr.shape[0], arr.shape[1]
    out = np.zeros_like(arr)
    for b in range(batch):
        n = int(lengths[b])
        out[b, :n] = arr[b, :n][::-1]
    return out


def _gru_direction(w_ih, w_hh, b_ih, b_hh, x, mask):
    """Run one GRU direction over (B, T, in); returns states and step cache."""
    batch, steps, _ = x.shape
    h_dim = w_hh.shape[1]
    h = np.zeros((batch, h_dim))
    states = np.zeros((batch, steps, h_dim))
    cache = []
    for t in range(steps):
        xt = x[:, t]
        gi = xt @ w_ih.T + b_ih
        gh_rz = h @ w_hh[: 2 * h_dim].T + b_hh[: 2 * h_dim]
        r = _sigmoid(gi[:, :h_dim] + gh_rz[:, :h_dim])
        z = _sigmoid(gi[:, h_dim : 2 * h_dim] + gh_rz[:, h_dim:])
        hh = h @ w_hh[2 * h_dim :].T + b_hh[2 * h_dim :]
        n = np.tanh(gi[:, 2 * h_dim :] + r * hh)
        h_new = (1.0 - z) * n + z * h
        m = mask[:, t : t + 1]
        h_next = m * h_new + (1.0 - m) * h
        cache.append((xt, h, r, z, n, hh, m))
        h = h_next
        states[:, t] = h
    return states, cache


def _gru_direction_backward(w_ih, w_hh, cache, d_states, d_final):
    """Backpropagate through one GRU direction.

    *d_states* holds per-step gradients on the masked states (may be zero),
    *d_final* the gradient on the state after the last step.
    """
    h_dim = w_hh.shape[1]
    steps = len(cache)
    batch = d_final.shape[0]
    in_dim = w_ih.shape[1]
    dw_ih = np.zeros_like(w_ih)
    dw_hh = np.zeros_like(w_hh)
    db_ih = np.zeros(3 * h_dim)
    db_hh = np.zeros(3 * h_dim)
    dx = np.zeros((batch, steps, in_dim))
    dh = d_final.copy()
    for t in range(steps - 1, -1, -1):
        dh = dh + d_states[:, t]
        xt, h_prev, r, z, n, hh, m = cache[t]
        dh_new = dh * m
        dh_prev = dh * (1.0 - m)
        dz = dh_new * (h_prev - n) * z * (1.0 - z)
        dn = dh_new * (1.0 - z) * (1.0 - n * n)
        dr = dn * hh * r * (1.0 - r)
        dhh = dn * r
        dh_prev += dh_new * z
        dh_prev += dr @ w_hh[:h_dim]
        dh_prev += dz @ w_hh[h_dim : 2 * h_dim]
        dh_prev += dhh @ w_hh[2 * h_dim :]
        dx[:, t] = dr @ w_ih[:h_dim] + dz @ w_ih[h_dim : 2 * h_dim] + dn @ w_ih[2 * h_dim :]
        dw_ih[:h_dim] += dr.T @ xt
        dw_ih[h_dim : 2 * h_dim] += dz.T @ xt
        dw_ih[2 * h_dim :] += dn.T @ xt
        dw_hh[:h_dim] += dr.T @ h_prev
        dw_hh[h_dim : 2 * h_dim] += dz.T @ h_prev
        dw_hh[2 * h_dim :] += dhh.T @ h_prev
        db_ih[:h_dim] += dr.sum(axis=0)
        db_ih[h_dim : 2 * h_dim] += dz.sum(axis=0)
        db_ih[2 * h_dim :] += dn.sum(axis=0)
        db_hh[:h_dim] += dr.sum(axis=0)
        db_hh[h_dim : 2 * h_dim] += dz.sum(axis=0)
        db_hh[2 * h_dim :] += dhh.sum(axis=0)
        dh = dh_prev
    return dw_ih, dw_hh, db_ih, db_hh, dx, dh


def forward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    raw: np.ndarray,
    lengths: np.ndarray,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Forward pass over a padded batch.

    *raw* has shape (B, T, 770) with zero rows past each true length.
    Returns (predictions of shape (B,), cache for backward).
    """
    batch, steps, _ = raw.shape
    if steps > config.seq_cap:
        raise DimensionMismatch(f"sequence length {steps} exceeds cap {config.seq_cap}")
    lengths = np.asarray(lengths, dtype=np.int64)
    mask = (np.arange(steps)[None, :] < lengths[:, None]).astype(float)

    x = build_input(raw, params["fc1_w"], params["fc1_b"])
    x = x * mask[:, :, None]

    cache: dict = {
        "raw": raw, "mask": mask, "lengths": lengths, "layers": [],
        "training": training,
    }
    layer_input = x
    finals = None
    for layer in range(config.num_layers):
        layer_cache: dict = {"input": layer_input, "dirs": []}
        dir_outputs = []
        finals = []
        for d in range(config.num_directions):
            prefix = f"gru_l{layer}d{d}"
            xin = layer_input if d == 0 else reverse_padded(layer_input, lengths)
            states, step_cache = _gru_direction(
                params[f"{prefix}_w_ih"], params[f"{prefix}_w_hh"],
                params[f"{prefix}_b_ih"], params[f"{prefix}_b_hh"], xin, mask,
            )
            finals.append(states[:, -1])
            out = states * mask[:, :, None]
            if d == 1:
                out = reverse_padded(out, lengths)
            dir_outputs.append(out)
            layer_cache["dirs"].append({"steps": step_cache})
        out_seq = np.concatenate(dir_outputs, axis=-1)
        if training and config.dropout > 0.0 and layer < config.num_layers - 1:
            if dropout_rng is None:
                dropout_rng = np.random.default_rng()
            keep = (dropout_rng.random(out_seq.shape) >= config.dropout).astype(float)
            keep /= 1.0 - config.dropout
            layer_cache["dropout_mask"] = keep
            out_seq = out_seq * keep
        cache["layers"].append(layer_cache)
        layer_input = out_seq

    feat = np.concatenate(finals, axis=-1)
    cache["feat"] = feat
    yhat = (feat @ params["fc2_w"].T + params["fc2_b"]).reshape(-1)
    if not np.all(np.isfinite(yhat)):
        raise NonFiniteActivation(
            f"non-finite prediction; batch={batch}, max|feat|={np.abs(feat).max():g}"
        )
    cache["yhat"] = yhat
    return yhat, cache


def backward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    cache: dict,
    dy: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of the scalar loss w.r.t. every parameter tensor.

    *dy* is the upstream gradient on the predictions, shape (B,).
    """
    grads = {name: np.zeros_like(params[name]) for name in params}
    dy = np.asarray(dy, dtype=float).reshape(-1, 1)
    feat = cache["feat"]
    mask = cache["mask"]
    lengths = cache["lengths"]
    h = config.hidden_dim

    grads["fc2_w"] += dy.T @ feat
    grads["fc2_b"] += dy.sum(axis=0)
    d_feat = dy @ params["fc2_w"]

    d_layer_out = None  # gradient on a layer's output sequence
    for layer in range(config.num_layers - 1, -1, -1):
        layer_cache = cache["layers"][layer]
        if d_layer_out is not None and "dropout_mask" in layer_cache:
            d_layer_out = d_layer_out * layer_cache["dropout_mask"]
        d_input = np.zeros_like(layer_cache["input"])
        for d in range(config.num_directions):
            prefix = f"gru_l{layer}d{d}"
            if layer == config.num_layers - 1:
                d_final = d_feat[:, d * h : (d + 1) * h]
                d_states = np.zeros(
                    (d_input.shape[0], d_input.shape[1], h)
                )
            else:
                d_final = np.zeros((d_input.shape[0], h))
                d_out = d_layer_out[:, :, d * h : (d + 1) * h]
                if d == 1:
                    d_out = reverse_padded(d_out, lengths)
                d_states = d_out * mask[:, :, None]
            dw_ih, dw_hh, db_ih, db_hh, dx, _ = _gru_direction_backward(
                params[f"{prefix}_w_ih"], params[f"{prefix}_w_hh"],
                layer_cache["dirs"][d]["steps"], d_states, d_final,
            )
            grads[f"{prefix}_w_ih"] += dw_ih
            grads[f"{prefix}_w_hh"] += dw_hh
            grads[f"{prefix}_b_ih"] += db_ih
            grads[f"{prefix}_b_hh"] += db_hh
            if d == 1:
                dx = reverse_padded(dx, lengths)
            d_input += dx
        d_layer_out = d_input

    # through the input projection: d_layer_out is now grad on x (masked)
    dx_in = d_layer_out * mask[:, :, None]
    raw = cache["raw"]
    d_proj = dx_in[:, :, : config.fc_out]
    e = raw[:, :, :EMBED_DIM]
    grads["fc1_w"] += np.einsum("bto,bte->oe", d_proj, e)
    grads["fc1_b"] += d_proj.sum(axis=(0, 1))
    return grads


# -- checkpoint container -------------------------------------------------

CKPT_MAGIC = "toneshift-ckpt"
CKPT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: dict[str, np.ndarray],
    config: ModelConfig,
    seed: int,
    bin_weights: dict | None = None,
    provider_id: str | None = None,
) -> str:
    """Write the self-describing binary checkpoint; returns the model id."""
    names = param_order(config)
    payload = b"".join(np.ascontiguousarray(params[n], dtype="<f4").tobytes() for n in names)
    model_id = hashlib.sha256(payload).hexdigest()[:16]
    header = {
        "magic": CKPT_MAGIC,
        "version": CKPT_VERSION,
        "config": asdict(config),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
        "dtype": "<f4",
        "endianness": "little",
        "seed": seed,
        "bin_weights": bin_weights,
        "provider_id": provider_id,
        "model_id": model_id,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)
    return model_id


def load_checkpoint(path: str | Path):
    """Read a checkpoint; returns (params, config, header dict)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("magic") != CKPT_MAGIC:
        raise ValueError("not a model checkpoint")
    if header.get("version") != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    config = ModelConfig(**header["config"])
    expected_id = hashlib.sha256(payload).hexdigest()[:16]
    if expected_id != header["model_id"]:
        raise ValueError("checkpoint payload does not match its model id")
    params: dict[str, np.ndarray] = {}
    offset = 0
    for spec_item in header["params"]:
        shape = tuple(spec_item["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        params[spec_item["name"]] = arr.reshape(shape).astype(np.float64)
        offset += count * 4
    return params, config, header
