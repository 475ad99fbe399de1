"""Binary agent checkpoints.

Layout::

    b"MAGNOCKP"                 8-byte magic
    uint32 LE                   format version
    uint64 LE                   header length in bytes
    header                      UTF-8 JSON (hyperparams, env hashes, tensor table,
                                RNG state, payload sha256, free-form metadata)
    payload                     named tensors, little-endian float64, C order,
                                concatenated in header-table order
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .agent import Hyperparams, SACAgent

MAGIC = b"MAGNOCKP"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def _pack(tensors: dict[str, np.ndarray]) -> tuple[list[dict], bytes]:
    table, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        table.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    return table, b"".join(chunks)


def to_bytes(agent: SACAgent, env_hash: str = "", interface_hash: str = "",
             env_config: dict | None = None, metadata: dict | None = None) -> bytes:
    table, payload = _pack(agent.tensors())
    header = {
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "hyperparams": agent.hp.to_dict(),
        "env_hash": env_hash,
        "interface_hash": interface_hash,
        "env_config": env_config,
        "noise_std": agent.noise_std,
        "n_updates": agent.n_updates,
        "rng_state": agent.rng.bit_generator.state,
        "tensors": table,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True, default=str).encode("utf-8")
    return MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(blob)) + blob + payload


def save(path, agent: SACAgent, **kwargs) -> Path:
    path = Path(path)
    data = to_bytes(agent, **kwargs)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path


def read(source) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a checkpoint into ``(header, tensors)``."""
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError("not a magnocool checkpoint (bad magic)")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format v{version}, this build reads v{FORMAT_VERSION}")
    header = json.loads(data[20:20 + hlen].decode("utf-8"))
    payload = data[20 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CheckpointError("checkpoint payload is corrupt (hash mismatch)")
    tensors = {}
    for entry in header["tensors"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=n, offset=entry["offset"])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).astype(float)
    return header, tensors


def load(source, restore_rng: bool = True) -> tuple[SACAgent, dict]:
    """Rebuild an agent (weights, optimizer moments, alpha, RNG) from a checkpoint."""
    header, tensors = read(source)
    hp = Hyperparams(**header["hyperparams"])
    agent = SACAgent(header["obs_dim"], header["act_dim"], hp)
    agent.load_tensors(tensors)
    for name in ("actor", "q1", "q2"):
        net = agent.actor.net if name == "actor" else getattr(agent, name)
        if not all(np.all(np.isfinite(p)) for p in net.params):
            raise CheckpointError(f"non-finite weights in {name}")
    agent.noise_std = header["noise_std"]
    agent.n_updates = header["n_updates"]
    if restore_rng:
        agent.rng.bit_generator.state = header["rng_state"]
    return agent, header
