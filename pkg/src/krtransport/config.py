"""TOML experiment configuration.

The key set is documented in docs/formats.md.  Parsing uses the standard
library tomllib (tomli on Python 3.10); syntax errors surface with line
diagnostics, semantic problems raise ConfigError naming the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .models import (
    BasisDecay,
    DensityModel,
    linear_tilt_model,
    posterior_model,
    uniform_model,
)

FAMILIES = ("uniform", "tilt", "posterior")
MODES = ("slice", "averaged")


@dataclass
class ExperimentConfig:
    family: str
    d: int
    decay: BasisDecay
    alpha: float = 1.0
    eps_list: list[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    mode: str = "slice"
    margin: int = 10
    tilt_c: list[float] = field(default_factory=list)
    posterior_data: float | list = 0.0
    posterior_noise_variance: float = 1.0
    tail_nodes: int = 16
    cdf_nodes: int = 64
    distance_nodes: int = 16
    mc_samples: int = 100_000
    probe_points: int = 1024
    w1_samples: int = 10_000
    seed: int = 20240801
    out: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"model.family must be one of {FAMILIES}; got {self.family!r}")
        if self.d < 1:
            raise ConfigError("model.d must be >= 1")
        if self.alpha <= 0:
            raise ConfigError("transport.alpha must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"transport.mode must be one of {MODES}")
        if not self.eps_list or any(e <= 0 or e > 1 for e in self.eps_list):
            raise ConfigError("transport.eps_list entries must lie in (0, 1]")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigError("transport.eps_list must be strictly decreasing")
        for name in ("margin", "tail_nodes", "cdf_nodes", "distance_nodes",
                     "mc_samples", "probe_points", "w1_samples", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.family == "tilt" and not self.tilt_c:
            raise ConfigError("model.tilt.c is required for the tilt family")

    # -- model factories ------------------------------------------------------

    def target_model(self) -> DensityModel:
        if self.family == "uniform":
            return uniform_model(self.d, decay=self.decay)
        if self.family == "tilt":
            return linear_tilt_model(self.tilt_c, d=self.d, decay=self.decay)
        return posterior_model(self.decay, self.d, data=self.posterior_data,
                               noise_variance=self.posterior_noise_variance)

    def reference_model(self) -> DensityModel:
        return uniform_model(self.d, decay=self.decay)


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing required key {section}.{key}")
    return table[key]


def config_from_dict(raw: dict) -> ExperimentConfig:
    model = raw.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing required [model] section")
    decay_tbl = _require(model, "decay", "model")
    try:
        if "b" in decay_tbl:
            decay = BasisDecay(
                b=[float(v) for v in decay_tbl["b"]],
                p=float(_require(decay_tbl, "p", "model.decay")),
                source="explicit",
            )
        else:
            decay = BasisDecay.algebraic(
                c=float(_require(decay_tbl, "c", "model.decay")),
                r=float(_require(decay_tbl, "r", "model.decay")),
                p=float(_require(decay_tbl, "p", "model.decay")),
                j_max=int(decay_tbl.get("j_max", 64)),
            )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid model.decay: {exc}") from exc
    transport = raw.get("transport", {})
    quadrature = raw.get("quadrature", {})
    probe = raw.get("probe", {})
    run = raw.get("run", {})
    tilt = model.get("tilt", {})
    posterior = model.get("posterior", {})
    if posterior and int(posterior.get("m", 1)) != 1:
        raise ConfigError("config posterior models support m = 1 only")
    return ExperimentConfig(
        family=str(_require(model, "family", "model")),
        d=int(_require(model, "d", "model")),
        decay=decay,
        alpha=float(transport.get("alpha", 1.0)),
        eps_list=[float(e) for e in transport.get("eps_list", [1e-1, 1e-2, 1e-3])],
        mode=str(transport.get("mode", "slice")),
        margin=int(transport.get("margin", 10)),
        tilt_c=[float(c) for c in tilt.get("c", [])],
        posterior_data=posterior.get("data", 0.0),
        posterior_noise_variance=posterior.get("noise_variance", 1.0),
        tail_nodes=int(quadrature.get("tail_nodes", 16)),
        cdf_nodes=int(quadrature.get("cdf_nodes", 64)),
        distance_nodes=int(quadrature.get("distance_nodes", 16)),
        mc_samples=int(quadrature.get("mc_samples", 100_000)),
        probe_points=int(probe.get("points", 1024)),
        w1_samples=int(probe.get("w1_samples", 10_000)),
        seed=int(run.get("seed", 20240801)),
        out=str(run.get("out", "out")),
        jobs=int(run.get("jobs", 1)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    return config_from_dict(raw)
