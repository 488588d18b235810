"""Self-describing checkpoint container.

Layout: ``b"MWGC"``, little-endian uint32 format version, uint64 header length,
a UTF-8 JSON header, then every tensor listed in the header as row-major
little-endian float32, back to back. The header carries the configurations,
the training step, the class catalog and per-class correlation matrices, and
``{"name", "shape", "offset"}`` for each tensor (offset from the end of the header).
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MWGC"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


@dataclass
class ModelCheckpoint:
    gen_cfg: dict
    disc_cfg: dict
    train_cfg: dict
    step: int
    generator: dict
    discriminator: dict
    optimizer: dict = field(default_factory=dict)
    optimizer_steps: dict = field(default_factory=dict)
    catalog: dict = None
    correlations: list = None

    def tensors(self):
        for prefix, group in (("generator", self.generator), ("discriminator", self.discriminator),
                              ("optimizer", self.optimizer)):
            for name in group:
                yield f"{prefix}/{name}", np.ascontiguousarray(group[name], dtype="<f4")

    def to_bytes(self):
        entries, blobs, offset = [], [], 0
        for name, arr in self.tensors():
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            blobs.append(arr.tobytes())
            offset += arr.nbytes
        corr = None
        if self.correlations is not None:
            corr = [{"real": np.real(R).tolist(), "imag": np.imag(R).tolist()} for R in self.correlations]
        header = {
            "format": "mimowave-checkpoint",
            "generator_config": self.gen_cfg,
            "discriminator_config": self.disc_cfg,
            "train_config": self.train_cfg,
            "step": int(self.step),
            "optimizer_steps": self.optimizer_steps,
            "catalog": self.catalog,
            "correlations": corr,
            "tensors": entries,
        }
        hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return _PREFIX.pack(MAGIC, VERSION, len(hb)) + hb + b"".join(blobs)

    @classmethod
    def from_bytes(cls, buf):
        magic, version, hlen = _PREFIX.unpack_from(buf)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint (magic {magic!r})")
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        start = _PREFIX.size
        header = json.loads(buf[start:start + hlen].decode("utf-8"))
        data = memoryview(buf)[start + hlen:]
        groups = {"generator": {}, "discriminator": {}, "optimizer": {}}
        for e in header["tensors"]:
            prefix, name = e["name"].split("/", 1)
            count = int(np.prod(e["shape"], dtype=np.int64))
            arr = np.frombuffer(data, dtype="<f4", count=count, offset=e["offset"])
            groups[prefix][name] = arr.reshape(e["shape"]).astype(np.float32)
        corr = header.get("correlations")
        if corr is not None:
            corr = [np.asarray(c["real"]) + 1j * np.asarray(c["imag"]) for c in corr]
        return cls(
            gen_cfg=header["generator_config"], disc_cfg=header["discriminator_config"],
            train_cfg=header["train_config"], step=header["step"],
            generator=groups["generator"], discriminator=groups["discriminator"],
            optimizer=groups["optimizer"], optimizer_steps=header.get("optimizer_steps", {}),
            catalog=header.get("catalog"), correlations=corr,
        )

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    @property
    def M(self):
        return int(self.gen_cfg["M"])

    @property
    def N(self):
        return int(self.gen_cfg["N"])
