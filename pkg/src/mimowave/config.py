"""Run configuration: one JSON document plus dotted ``key=value`` overrides."""

import copy
import json
import os

import numpy as np

from .array import AngleGrid, ArrayGeometry
from .beamspec import BeamClassCatalog, default_catalog, notched_beam, rect_beam


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "paths": {
        "dataset_dir": "dataset",
        "checkpoint": "model.ckpt",
        "metric_log": "train_log.csv",
        "output_dir": "out",
    },
    "array": {"M": 10, "spacing": 0.5, "positions": None},
    "grid": {"start": -90.0, "stop": 90.0, "step": 1.0},
    "N": 41,
    "catalog": "default",
    "dataset": {"samples_per_class": 1000, "n_jobs": None},
    "covfit": {"restarts": 8, "max_iters": 2000, "tol": 1e-8},
    "cao": {"tol": 1e-3, "max_iter": 10000},
    "generator": {"embed_hidden": 128, "recurrent_hidden": 256, "recurrent_layers": 2, "leaky_slope": 0.2},
    "discriminator": {
        "channels": [128, 256, 512],
        "kernels": [[5, 5], [4, 4], [4, 4]],
        "strides": [[2, 1], [2, 2], [2, 2]],
        "paddings": [[1, 1], [1, 1], [1, 1]],
        "leaky_slope": 0.2,
        "input_noise_std": 0.1,
    },
    "train": {
        "critic_iters": 5, "lambda_gp": 10.0, "nu_corr": 10.0, "batch_size": 64, "n_steps": 20000,
        "lr": 1e-4, "betas": [0.5, 0.9], "deterministic": True, "checkpoint_every": 500,
    },
    "eval": {"samples_per_class": 100, "class_id": 0, "bench_repeats": 5},
    "seeds": {"dataset": 0, "train": 0, "generate": 0},
}


def _merge(base, over, path=""):
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, path + k + ".")
        else:
            base[k] = v
    return base


def apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.strip().split(".")
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def load_config(path=None, overrides=()):
    """Defaults, then the file at ``path``, then each ``key=value`` override.

    Relative paths under ``paths`` resolve against the config file's directory.
    """
    cfg = copy.deepcopy(DEFAULTS)
    base = os.getcwd()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        _merge(cfg, doc)
        base = os.path.dirname(os.path.abspath(path))
    for o in overrides:
        apply_override(cfg, o)
    for k, v in cfg["paths"].items():
        if v is not None and not os.path.isabs(v):
            cfg["paths"][k] = os.path.join(base, v)
    return RunConfig(cfg)


class RunConfig:
    def __init__(self, doc):
        self.doc = doc

    def __getitem__(self, key):
        return self.doc[key]

    @property
    def N(self):
        return int(self.doc["N"])

    @property
    def M(self):
        return int(self.doc["array"]["M"])

    def path(self, name):
        return self.doc["paths"][name]

    def geometry(self):
        a = self.doc["array"]
        if a.get("positions") is not None:
            geom = ArrayGeometry(np.asarray(a["positions"], dtype=float))
            if geom.num_elements != self.M:
                raise ConfigError(f"array.positions has {geom.num_elements} entries but array.M={self.M}")
            return geom
        return ArrayGeometry.ula(self.M, a["spacing"])

    def grid(self):
        g = self.doc["grid"]
        return AngleGrid.uniform(g["step"], g["start"], g["stop"])

    def catalog(self):
        src = self.doc["catalog"]
        if src == "default":
            return default_catalog()
        if isinstance(src, str):
            return BeamClassCatalog.load(src)
        if isinstance(src, dict):
            specs = [rect_beam(w) for w in src.get("rect_widths", [])]
            if src.get("notched"):
                specs.append(notched_beam())
            if not specs:
                raise ConfigError("catalog description yields no classes")
            return BeamClassCatalog.from_specs(specs)
        raise ConfigError(f"cannot interpret catalog {src!r}")

    def generator_config(self):
        from .gan import GeneratorConfig

        return GeneratorConfig(N=self.N, M=self.M, **self.doc["generator"])

    def discriminator_config(self):
        from .gan import DiscriminatorConfig

        return DiscriminatorConfig(N=self.N, M=self.M, **self.doc["discriminator"])

    def train_config(self):
        from .gan import TrainConfig

        return TrainConfig(seed=int(self.doc["seeds"]["train"]), **self.doc["train"])

    def dumps(self):
        return json.dumps(self.doc, indent=2, sort_keys=True) + "\n"
