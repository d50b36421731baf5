"""Experiment configuration, canonical hashing, and run manifests.

Configs are plain YAML mappings. Canonicalization sorts keys recursively and
renders numbers with shortest round-trip repr before hashing, so the hash
changes exactly when the canonical text changes, independent of key order or
numeral spelling in the source file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..dynamics import MultiShift, SkewShift, Transform, standard_frequencies
from ..potential import FourierSeries2, preset_potential

__all__ = [
    "Constants",
    "ExperimentConfig",
    "RunManifest",
    "resolve_transform",
    "canonical_text",
    "config_hash",
]


@dataclass(frozen=True)
class Constants:
    """The non-effective constants, collected in one place with defaults.

    tau/sigma: deviation-threshold exponents; gamma: positivity fraction of
    S; c0: multiscale constant; kappa/dioph_a: Diophantine parameters;
    c_impl/c_cov: implicit-function and cover constants; c_ap: avalanche
    constant; threshold_c: deviation threshold prefactor;
    positivity_lambda_min: smallest |coupling| at which the sweep flags
    mean_le < gamma * log|coupling|.
    """

    tau: float = 0.25
    sigma: float = 0.5
    gamma: float = 0.25
    c0: float = 4.0
    kappa: float = 0.05
    dioph_a: float = 3.0
    c_impl: float = 0.5
    c_cov: float = 8.0
    c_ap: float = 10.0
    threshold_c: float = 1.0
    positivity_lambda_min: float = 2.0


def resolve_transform(spec) -> Transform:
    """Accept a preset name or an explicit {kind, omega...} mapping."""
    if isinstance(spec, (SkewShift, MultiShift)):
        return spec
    if isinstance(spec, str):
        presets = standard_frequencies()
        if spec in presets:
            return presets[spec]
        raise ValueError(f"unknown frequency preset {spec!r}; known: {sorted(presets)}")
    kind = spec.get("kind", "skew")
    if kind == "skew":
        return SkewShift(float(spec["omega"]))
    if kind == "multi":
        return MultiShift(float(spec["omega1"]), float(spec["omega2"]))
    raise ValueError(f"unknown transform kind {kind!r}")


@dataclass
class ExperimentConfig:
    transform: object = "golden"
    potential: str = "cos-sum"
    coupling: float = 10.0
    e_grid: object = "spectrum-auto"  # or {lo, hi, count}
    phases: dict = field(default_factory=lambda: {"mode": "grid", "n": 64})
    scales: list = field(default_factory=lambda: [50, 100, 200, 400])
    energy: float = 0.7
    energy2: float = 0.701
    n0: int = 20
    n: int = 400
    box_n: int = 256
    eps: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    phase: list = field(default_factory=lambda: [0.1234, 0.4321])
    out_dir: str = "out"
    seed: int = 1234
    threads: int = 1
    constants: Constants = field(default_factory=Constants)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "constants" in kwargs and not isinstance(kwargs["constants"], Constants):
            kwargs["constants"] = Constants(**kwargs["constants"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config root must be a mapping, got {type(data).__name__}")
        return cls.from_mapping(data)

    def validate(self) -> None:
        resolve_transform(self.transform)
        preset_potential(self.potential)
        scales = list(self.scales)
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be strictly increasing")
        mode = self.phases.get("mode", "grid")
        if mode not in ("grid", "mc"):
            raise ValueError(f"phases.mode must be grid or mc, got {mode!r}")
        if int(self.phases.get("n", 0)) < 2:
            raise ValueError("phases.n must be >= 2")

    # resolved objects ------------------------------------------------------

    def transform_obj(self) -> Transform:
        return resolve_transform(self.transform)

    def potential_obj(self) -> FourierSeries2:
        return preset_potential(self.potential)

    def energy_grid(self) -> list[float]:
        if self.e_grid == "spectrum-auto":
            b = self.potential_obj().sup_norm_bound()
            hi = 2.0 + abs(self.coupling) * b
            lo, count = -hi, 33
        else:
            lo = float(self.e_grid["lo"])
            hi = float(self.e_grid["hi"])
            count = int(self.e_grid["count"])
        if count == 1:
            return [0.5 * (lo + hi)]
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]

    def to_mapping(self) -> dict:
        data = asdict(self)
        return data


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(x) for x in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(repr(obj)) if obj == obj else "nan"
    return str(obj)


def canonical_text(cfg: ExperimentConfig) -> str:
    return json.dumps(_canonical(cfg.to_mapping()), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    backend: str
    command: str
    constants: dict
    outputs: list  # [{"file": name, "rows": count}]

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
