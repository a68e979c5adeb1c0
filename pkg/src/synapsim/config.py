"""Config files: a TOML tree with one section per subsystem.

Sections: [model] (continuous system), [discrete] (integer system),
[blowup] (raw quadratic coefficients), [init], [run], and per-subcommand
defaults ([sweep], [equilibrium], [limit_ode], [couple]).  The raw text is
kept verbatim so outputs can echo their provenance.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .discrete import DiscreteParams, DiscreteState
from .equilibrium import LinearLimitCoefficients
from .functions import FunctionSpec, constant
from .model import Bounds, ModelSpec, NSpecs, SystemState

PRESETS = ("simple", "dominating", "truncated-K", "discrete",
           "linear-blowup-pos", "linear-blowup-zero", "linear-blowup-neg")


def preset_path(name: str) -> Path:
    fname = name.replace("-", "_") + ".toml"
    path = Path(__file__).parent / "presets" / fname
    if not path.exists():
        raise FileNotFoundError(f"unknown preset {name!r}; have {PRESETS}")
    return path


@dataclass(frozen=True)
class Config:
    data: dict
    raw_text: str
    source: str

    def section(self, name: str) -> dict:
        return dict(self.data.get(name, {}))


def load_config(path) -> Config:
    path = Path(path)
    text = path.read_text()
    return Config(tomllib.loads(text), text, str(path))


def load_preset(name: str) -> Config:
    return load_config(preset_path(name))


def apply_overrides(cfg: Config, overrides: list[str]) -> Config:
    """Apply dotted key=TOML-value overrides, e.g. run.epsilon=0.01."""
    data = _deep_copy(cfg.data)
    lines = []
    for ov in overrides:
        key, _, raw = ov.partition("=")
        if not _:
            raise ValueError(f"override {ov!r} must look like section.key=value")
        parsed = tomllib.loads(f"v = {raw}")["v"]
        node = data
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = parsed
        lines.append(f"# override: {ov}")
    text = cfg.raw_text + ("\n" + "\n".join(lines) + "\n" if lines else "")
    return Config(data, text, cfg.source)


def _deep_copy(d):
    if isinstance(d, dict):
        return {k: _deep_copy(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_deep_copy(v) for v in d]
    return d


def parse_function(d: dict | None) -> FunctionSpec:
    if d is None:
        return constant(0.0)
    weights = tuple(d["weights"]) if "weights" in d else None
    return FunctionSpec(d["kind"], tuple(d["coeffs"]), weights)


def parse_model(cfg: Config) -> ModelSpec:
    m = cfg.section("model")
    if not m:
        raise ValueError(f"{cfg.source} has no [model] section")
    ell = int(m.get("ell", 1))
    n_tbl = m.get("n", {})
    n = NSpecs(**{f"{a}{j}": parse_function(n_tbl.get(f"{a}{j}"))
                  for a in "pd" for j in range(3)})
    mm = m.get("m", {})
    kw_lo = float(m.get("kw_min", -math.inf))
    kw_hi = float(m.get("kw_max", math.inf))
    k1 = m.get("k1", [])
    k2 = m.get("k2", [])
    return ModelSpec(
        lam=float(m["lambda"]),
        ell=ell,
        gamma=tuple(float(g) for g in m["gamma"]),
        k0=tuple(float(k) for k in m.get("k0", [0.0] * ell)),
        k1=tuple(parse_function(d) for d in k1) or (constant(0.0),) * ell,
        k2=tuple(parse_function(d) for d in k2) or (constant(0.0),) * ell,
        beta=parse_function(m.get("beta")),
        g=parse_function(m.get("g")),
        n=n,
        alpha=float(m.get("alpha", 1.0)),
        m_p=parse_function(mm.get("potentiation")),
        m_d=parse_function(mm.get("depression")),
        delta=float(m.get("delta", 0.0)),
        bounds=Bounds(**{k: float(v) for k, v in m.get("bounds", {}).items()}),
        kw=(kw_lo, kw_hi),
        weight_update=m.get("weight_update", "drift"),
        w_jump_coeff=(tuple(float(c) for c in m["w_jump_coeff"])
                      if "w_jump_coeff" in m else None),
        name=cfg.data.get("name", "model"),
    )


def parse_init(cfg: Config, ell: int) -> SystemState:
    d = cfg.section("init")
    z = d.get("z", [0.0] * ell)
    return SystemState(float(d.get("x", 0.0)), np.asarray(z, dtype=float),
                       float(d.get("omega_p", 0.0)), float(d.get("omega_d", 0.0)),
                       float(d.get("w", 0.0)))


def parse_discrete(cfg: Config) -> DiscreteParams:
    d = cfg.section("discrete")
    if not d:
        raise ValueError(f"{cfg.source} has no [discrete] section")
    n_tbl = d.get("n", {})
    n = NSpecs(**{f"{a}{j}": parse_function(n_tbl.get(f"{a}{j}"))
                  for a in "pd" for j in range(3)})
    return DiscreteParams(
        lam=float(d["lambda"]), beta=float(d["beta"]), gamma=float(d["gamma"]),
        delta=float(d.get("delta", 0.0)), alpha=float(d.get("alpha", 1.0)),
        B1=tuple(int(b) for b in d["B1"]), B2=tuple(int(b) for b in d["B2"]),
        A_p=int(d.get("A_p", 0)), A_d=int(d.get("A_d", 0)),
        n=n, C_n=float(d.get("C_n", 0.0)),
        name=cfg.data.get("name", "discrete"),
    )


def parse_discrete_init(cfg: Config, ell: int) -> DiscreteState:
    d = cfg.section("init")
    z = d.get("z", [0] * ell)
    return DiscreteState(int(d.get("x", 0)), np.asarray(z, dtype=np.int64),
                         float(d.get("omega_p", 0.0)), float(d.get("omega_d", 0.0)),
                         int(d.get("w", 0)))


def parse_blowup(cfg: Config) -> tuple[LinearLimitCoefficients, float]:
    d = cfg.section("blowup")
    if not d:
        raise ValueError(f"{cfg.source} has no [blowup] section")
    coeffs = LinearLimitCoefficients(float(d["lambda2"]), float(d["lambda1"]),
                                     float(d["lambda0"]))
    return coeffs, float(d.get("w0", 0.0))
