"""Checkpoint file: magic ``LCKP``, u32 version, u32 manifest length, a JSON
manifest (stage label, then per tensor its name, dims and trainable flag),
then each tensor's float32 little-endian data in manifest order."""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, FormatError, TruncatedFile
from .model import flatten, group_of, unflatten
from .train import STAGE_GROUPS

MAGIC = b"LCKP"
VERSION = 1
_HEAD = struct.Struct("<4sII")


def save_checkpoint(path, state, denoiser, stage="A"):
    params = flatten(state, denoiser)
    trainable = set(STAGE_GROUPS[stage])
    names = sorted(params)
    manifest = {"stage": stage, "params": [
        {"name": k, "dims": list(np.shape(params[k])), "trainable": group_of(k) in trainable}
        for k in names]}
    blob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.asarray(params[k], dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns ``(state, denoiser, manifest)``; values come back as float64."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise TruncatedFile(f"{path}: header truncated")
    magic, version, n = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = _HEAD.size + n
    if len(data) < off:
        raise TruncatedFile(f"{path}: manifest truncated")
    manifest = json.loads(data[_HEAD.size:off])
    params = {}
    for entry in manifest["params"]:
        count = int(np.prod(entry["dims"], dtype=np.int64))
        if len(data) < off + 4 * count:
            raise TruncatedFile(f"{path}: tensor {entry['name']} truncated")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off)
        params[entry["name"]] = arr.reshape(entry["dims"]).astype(np.float64)
        off += 4 * count
    state, denoiser = unflatten(params)
    return state, denoiser, manifest


def save_loss_trace(path, losses):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss"])
        for k, v in enumerate(losses):
            w.writerow([k, repr(float(v))])


def load_loss_trace(path):
    with open(path, newline="") as fh:
        return [float(r["loss"]) for r in csv.DictReader(fh)]
