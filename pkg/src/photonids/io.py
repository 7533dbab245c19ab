"""On-disk formats: event captures, raw streams, model checkpoints, CSV tables.

Event file ("PHID", little-endian)::

    magic      4s   b"PHID"
    version    u16
    sample_rate_hz u64
    pre_samples    u16
    post_samples   u16
    event_count    u32
    then per event: trigger_index u64, label u8 (0 dark, 1 photon, 255 unknown),
                    (pre + post) x i16 samples

Checkpoint ("PHNN", little-endian)::

    magic b"PHNN", version u16, kind_len u16, kind (utf-8), n_tensors u32,
    descriptor table: per tensor name_len u16, name (utf-8), ndim u8, ndim x u32 dims,
    then every tensor's data in table order as f32.

A JSON sidecar (``<path>.json``) carries hyperparameters, seed and losses.
"""
from __future__ import annotations

import csv
import io as _io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .neural.models import CnnModel, FcnnModel

EVENT_MAGIC = b"PHID"
EVENT_VERSION = 1
_EVENT_HEADER = struct.Struct("<4sHQHHI")

CKPT_MAGIC = b"PHNN"
CKPT_VERSION = 1

STREAM_MAGIC = b"PHST"
_STREAM_HEADER = struct.Struct("<4sHQQ")


class FormatError(ValueError):
    pass


@dataclass
class EventFile:
    samples: np.ndarray  # (n, pre + post) int16
    trigger_indices: np.ndarray  # uint64
    labels: np.ndarray  # uint8
    sample_rate_hz: int = 2_000_000_000
    pre_samples: int = 8
    post_samples: int = 192

    def __len__(self):
        return len(self.samples)


def _event_dtype(window):
    return np.dtype([("trigger", "<u8"), ("label", "u1"), ("samples", "<i2", (window,))])


def write_events(path, ev: EventFile) -> None:
    window = ev.pre_samples + ev.post_samples
    samples = np.asarray(ev.samples)
    if samples.ndim != 2 or samples.shape[1] != window:
        raise FormatError(f"events must be (n, {window})")
    rec = np.empty(len(samples), dtype=_event_dtype(window))
    rec["trigger"] = ev.trigger_indices
    rec["label"] = ev.labels
    rec["samples"] = samples
    with open(path, "wb") as fh:
        fh.write(_EVENT_HEADER.pack(EVENT_MAGIC, EVENT_VERSION, int(ev.sample_rate_hz),
                                    ev.pre_samples, ev.post_samples, len(samples)))
        fh.write(rec.tobytes())


def read_events(path) -> EventFile:
    data = Path(path).read_bytes()
    if len(data) < _EVENT_HEADER.size:
        raise FormatError("truncated event file header")
    magic, version, rate, pre, post, count = _EVENT_HEADER.unpack_from(data)
    if magic != EVENT_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != EVENT_VERSION:
        raise FormatError(f"unsupported event file version {version}")
    dt = _event_dtype(pre + post)
    body = data[_EVENT_HEADER.size:]
    if len(body) != count * dt.itemsize:
        raise FormatError(f"expected {count} events, body holds {len(body) / dt.itemsize:g}")
    rec = np.frombuffer(body, dtype=dt)
    return EventFile(rec["samples"].astype(np.int16), rec["trigger"].astype(np.uint64),
                     rec["label"].astype(np.uint8), rate, pre, post)


def write_stream(path, samples, sample_rate_hz: int = 2_000_000_000) -> None:
    """Raw stream file: magic b"PHST", version u16, sample_rate_hz u64, n u64, n x i16."""
    x = np.asarray(samples, dtype="<i2")
    with open(path, "wb") as fh:
        fh.write(_STREAM_HEADER.pack(STREAM_MAGIC, 1, int(sample_rate_hz), x.size))
        fh.write(x.tobytes())


def read_stream(path):
    data = Path(path).read_bytes()
    magic, version, rate, n = _STREAM_HEADER.unpack_from(data)
    if magic != STREAM_MAGIC or version != 1:
        raise FormatError("not a stream file")
    x = np.frombuffer(data, dtype="<i2", offset=_STREAM_HEADER.size)
    if x.size != n:
        raise FormatError("truncated stream file")
    return x.astype(np.int16), rate


def _model_tensors(model) -> dict:
    tensors = {f"net.{k}": v for k, v in model.net.state().items()}
    tensors.update({f"extra.{k}": np.asarray(v) for k, v in model.extras().items()})
    return tensors


def save_checkpoint(path, model, metadata: dict | None = None) -> None:
    tensors = _model_tensors(model)
    kind = model.kind.encode()
    head = [CKPT_MAGIC, struct.pack("<HH", CKPT_VERSION, len(kind)), kind,
            struct.pack("<I", len(tensors))]
    blobs = []
    for name, arr in tensors.items():
        nb = name.encode()
        arr = np.asarray(arr)
        head.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim)
                    + struct.pack(f"<{arr.ndim}I", *arr.shape))
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(head + blobs))
    meta = {"kind": model.kind, "seed": getattr(model, "seed", None)}
    meta.update(metadata or {})
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, default=str))


def load_checkpoint(path):
    data = Path(path).read_bytes()
    buf = _io.BytesIO(data)
    if buf.read(4) != CKPT_MAGIC:
        raise FormatError("not a PHNN checkpoint")
    version, klen = struct.unpack("<HH", buf.read(4))
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    kind = buf.read(klen).decode()
    (n,) = struct.unpack("<I", buf.read(4))
    table = []
    for _ in range(n):
        (nl,) = struct.unpack("<H", buf.read(2))
        name = buf.read(nl).decode()
        (nd,) = struct.unpack("<B", buf.read(1))
        dims = struct.unpack(f"<{nd}I", buf.read(4 * nd))
        table.append((name, dims))
    tensors = {}
    for name, dims in table:
        count = int(np.prod(dims)) if dims else 1
        tensors[name] = np.frombuffer(buf.read(4 * count), dtype="<f4").reshape(dims).astype(np.float32)

    net = {k[4:]: v for k, v in tensors.items() if k.startswith("net.")}
    extras = {k[6:]: v for k, v in tensors.items() if k.startswith("extra.")}
    if kind == "cnn":
        model = CnnModel(n_outputs=net["10.bias"].shape[0])
    elif kind == "fcnn":
        model = FcnnModel(n_inputs=net["0.weight"].shape[1])
    else:
        raise FormatError(f"unknown model kind {kind!r}")
    model.net.load_state(net)
    model.load_extras(extras)
    meta_path = Path(str(path) + ".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        model.seed = meta.get("seed", model.seed)
    return model


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
