"""Run configuration: one validated document driving every command.

A RunConfig bundles the plant description with the controller-side
choices (mode set, horizon, cost weights, identification dwell and
chain direction, seed).  It loads from JSON or TOML; a stable hash of
the canonical document goes into every output manifest so runs are
attributable.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .planner import DEFAULT_HORIZON, CostWeights
from .plant import PlantConfig, reference_plant_config, reference_prior
from .sysid import Prior, experiment_schedule

__all__ = ["RunConfig", "default_run_config", "load_config"]


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; control_sats default to the plant anchors."""

    plant: PlantConfig
    control_sats: np.ndarray = None
    horizon: int = DEFAULT_HORIZON
    weights: CostWeights = None
    prior: Prior = None
    dwell_minutes: int = 120
    chain: str = "verbatim"
    seed: int = 0

    def __post_init__(self):
        sats = self.control_sats
        if sats is None:
            sats = self.plant.sats
        sats = np.asarray(sats, dtype=float)
        if sats.ndim != 1 or sats.size == 0 or np.any(np.diff(sats) <= 0):
            raise ValueError(f"control SATs must be strictly increasing, got {sats}")
        lo, hi = self.plant.sat_range
        if sats[0] < lo or sats[-1] > hi:
            raise ValueError(f"control SATs {sats} exceed the plant's range [{lo}, {hi}]")
        object.__setattr__(self, "control_sats", sats)
        if self.prior is not None and self.prior.n_modes != sats.shape[0]:
            raise ValueError(
                f"prior covers {self.prior.n_modes} modes, control set has {sats.shape[0]}"
            )
        if int(self.horizon) < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        if int(self.dwell_minutes) < 15:
            raise ValueError(f"dwell must be at least 15 minutes, got {self.dwell_minutes}")
        object.__setattr__(self, "dwell_minutes", int(self.dwell_minutes))
        if self.chain not in ("verbatim", "flipped"):
            raise ValueError(f"chain must be 'verbatim' or 'flipped', got {self.chain!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_zones(self):
        return self.plant.n_zones

    def cost_weights(self):
        if self.weights is not None:
            return self.weights
        return CostWeights.default_for(self.plant.alphas)

    def schedule(self, start=None):
        return experiment_schedule(
            self.control_sats, dwell=timedelta(minutes=self.dwell_minutes), start=start
        )

    def to_dict(self):
        doc = {
            "plant": self.plant.to_dict(),
            "control_sats": self.control_sats.tolist(),
            "horizon": self.horizon,
            "weights": "auto" if self.weights is None else
                       [self.weights.lam, self.weights.mu, self.weights.gamma],
            "prior": None if self.prior is None else {
                "a_mean": self.prior.a_mean, "a_var": self.prior.a_var,
                "b_mean": self.prior.b_mean.tolist(), "b_var": self.prior.b_var.tolist(),
                "c_mean": self.prior.c_mean, "c_var": self.prior.c_var,
            },
            "dwell_minutes": self.dwell_minutes,
            "chain": self.chain,
            "seed": self.seed,
        }
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        plant = doc.pop("plant", None)
        plant = reference_plant_config() if plant is None else PlantConfig.from_dict(plant)
        weights = doc.pop("weights", "auto")
        if weights == "auto" or weights is None:
            weights = None
        else:
            lam, mu, gamma = (float(v) for v in weights)
            weights = CostWeights(lam=lam, mu=mu, gamma=gamma)
        prior = doc.pop("prior", None)
        if prior is not None:
            prior = Prior(**prior)
        return cls(plant=plant, weights=weights, prior=prior, **doc)

    @property
    def config_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def manifest(self, **extra):
        doc = {"config_hash": self.config_hash, "seed": self.seed, "version": _pkg_version()}
        doc.update(extra)
        return doc


def _pkg_version():
    from . import __version__

    return __version__


def default_run_config(n_zones=4):
    """The documented reference setup used throughout the test pipeline."""
    return RunConfig(plant=reference_plant_config(n_zones=n_zones), prior=reference_prior())


def load_config(path):
    """Read a RunConfig from a .json or .toml file."""
    text = open(path, "rb").read()
    name = str(path).lower()
    if name.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        doc = tomllib.loads(text.decode())
    elif name.endswith(".json"):
        doc = json.loads(text)
    else:
        raise ValueError(f"config must be .json or .toml, got {path}")
    return RunConfig.from_dict(doc)
