"""Offline container: ``manifest.json`` plus one raw ``<f8`` row-major file per array."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .config import canonical_json, config_hash

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


class ContainerError(RuntimeError):
    pass


@dataclass
class OfflineContainer:
    manifest: dict
    arrays: dict = field(default_factory=dict)

    @property
    def config(self):
        return self.manifest["config"]

    @property
    def has_oracle(self):
        return "oracle_mass" in self.arrays

    def oracle_matrices(self):
        """Detailed ``(blocks, mass)`` stored with ``--with-oracle``."""
        if not self.has_oracle:
            raise ContainerError("container was written without oracle data (--with-oracle)")
        n = self.manifest["dims"]["n_dofs"]

        def csr(a):
            return sp.csr_matrix((a[:, 2], (a[:, 0].astype(np.int64), a[:, 1].astype(np.int64))), shape=(n, n))

        Q = self.manifest["dims"]["Q"]
        return [csr(self.arrays[f"oracle_block_{q}"]) for q in range(Q)], csr(self.arrays["oracle_mass"])


def _coo_triplets(A):
    A = sp.coo_matrix(A)
    return np.column_stack([A.row.astype(np.float64), A.col.astype(np.float64), A.data])


def oracle_arrays(op):
    out = {"oracle_mass": _coo_triplets(op.mass)}
    for q, Aq in enumerate(op.blocks):
        out[f"oracle_block_{q}"] = _coo_triplets(Aq)
    return out


def _digest(manifest, arrays):
    h = hashlib.sha256()
    body = {k: v for k, v in manifest.items() if k != "container_hash"}
    h.update(canonical_json(body).encode("utf-8"))
    for name in sorted(arrays):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
    return h.hexdigest()


def build(config, dims, arrays, extra=None):
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash(config),
        "config": config,
        "dims": dims,
        "arrays": {
            name: {"file": f"{name}.f64", "shape": list(np.shape(a)), "dtype": "<f8", "order": "C"}
            for name, a in sorted(arrays.items())
        },
    }
    if extra:
        manifest.update(extra)
    arrays = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in arrays.items()}
    manifest["container_hash"] = _digest(manifest, arrays)
    return OfflineContainer(manifest, arrays)


def save(container: OfflineContainer, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, meta in container.manifest["arrays"].items():
        (d / meta["file"]).write_bytes(np.ascontiguousarray(container.arrays[name], dtype="<f8").tobytes())
    (d / MANIFEST).write_text(json.dumps(container.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def load(directory, expected_config=None):
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ContainerError(f"no manifest in {d}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported container format {manifest.get('format_version')}")
    if manifest["config_hash"] != config_hash(manifest["config"]):
        raise ContainerError("manifest config hash does not match its config")
    if expected_config is not None and config_hash(expected_config) != manifest["config_hash"]:
        raise ContainerError("container was built from a different config")
    arrays = {}
    for name, meta in manifest["arrays"].items():
        raw = np.frombuffer((d / meta["file"]).read_bytes(), dtype="<f8")
        shape = tuple(meta["shape"])
        if raw.size != int(np.prod(shape)):
            raise ContainerError(f"array {name}: {raw.size} values, manifest says shape {shape}")
        arrays[name] = raw.reshape(shape).astype(np.float64)
    if _digest(manifest, arrays) != manifest["container_hash"]:
        raise ContainerError("container content hash mismatch")
    return OfflineContainer(manifest, arrays)
