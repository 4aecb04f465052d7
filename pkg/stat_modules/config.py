#!/usr/bin/env python3
"""
stat_modules/config.py

Sampler, prior and run configuration. Defaults are the values used for the
published experiments; `McmcConfig.desk()` gives a quick preset.
"""
import json
import os
from math import comb
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from stat_modules.errors import ConfigError

# Directory for stat_modules data/config
DATA_DIR = os.path.dirname(os.path.abspath(__file__))

PACKAGE_NAME    = "hyperrecon"
PACKAGE_VERSION = "0.3.0"
FORMAT_VERSION  = 1

ModelTag = Literal["hypergraph", "categorical"]
MODELS: Tuple[str, str] = ("hypergraph", "categorical")


class Hyperparams(BaseModel):
    """Beta prior (ξ, ζ) on structure probabilities and Gamma priors (α_k, β_k) on rates."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    xi:     float = Field(1.1,  gt=0)
    zeta:   float = Field(5.0,  gt=0)
    alpha0: float = Field(1.05, gt=0)
    alpha1: float = Field(1.05, gt=0)
    alpha2: float = Field(1.05, gt=0)
    beta0:  float = Field(0.5,  gt=0)
    beta1:  float = Field(0.5,  gt=0)
    beta2:  float = Field(0.5,  gt=0)

    @property
    def alphas(self) -> Tuple[float, float, float]:
        return (self.alpha0, self.alpha1, self.alpha2)

    @property
    def betas(self) -> Tuple[float, float, float]:
        return (self.beta0, self.beta1, self.beta2)


class McmcConfig(BaseModel):
    """
    Metropolis-Hastings-within-Gibbs settings.

    W, iter_min and iter_max are counted in `iteration_unit`: one structure
    proposal ("proposal") or one full gibbs iteration ("sweep").
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    eta:  float = Field(0.5,    gt=0, lt=1)
    nu2:  float = Field(0.4999, gt=0, lt=1)
    nu3:  float = Field(0.4999, gt=0, lt=1)
    chi0: float = Field(0.99,   gt=0, lt=1)
    chi1: float = Field(0.01,   gt=0, lt=1)

    window_w:  int   = Field(20_000,    gt=0)
    tol_delta: float = Field(0.02,      gt=0)
    iter_min:  int   = Field(200_000,   gt=0)
    iter_max:  int   = Field(1_000_000, gt=0)
    iteration_unit: Literal["proposal", "sweep"] = "proposal"
    proposals_per_sweep: Optional[int] = Field(None, ge=0)

    n_chains:      int = Field(4,   gt=0)
    sample_stride: int = Field(100, gt=0)
    n_samples:     int = Field(100, gt=0)
    n_workers:     int = Field(1,   gt=0)
    master_seed:   int = Field(0,   ge=0)

    trunc_rejection_threshold: float = Field(0.1, gt=0, le=1)

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.nu2 + self.nu3 >= 1:
            raise ValueError(f"nu2 + nu3 must be < 1 (got {self.nu2 + self.nu3})")
        if self.iter_min > self.iter_max:
            raise ValueError(f"iter_min ({self.iter_min}) exceeds iter_max ({self.iter_max})")
        return self

    @property
    def nu_hidden(self) -> float:
        return 1.0 - self.nu2 - self.nu3

    def sweep_size(self, n: int) -> int:
        """Structure proposals per gibbs iteration; C(n,2) unless overridden."""
        if self.proposals_per_sweep is not None:
            return self.proposals_per_sweep
        return comb(n, 2)

    @classmethod
    def desk(cls, **overrides) -> "McmcConfig":
        """Reduced windows for laptop-scale runs and CI."""
        base = dict(window_w=2_000, iter_min=20_000, iter_max=100_000)
        base.update(overrides)
        return cls(**base)


class RunConfig(BaseModel):
    """Everything `infer` needs besides the observations."""
    model_config = ConfigDict(extra="forbid")

    model: ModelTag = "hypergraph"
    init_mode: Literal["mixture", "ground_truth"] = "mixture"
    mcmc: McmcConfig = Field(default_factory=McmcConfig)
    hyperparams: Hyperparams = Field(default_factory=Hyperparams)
    true_mu: Optional[Tuple[float, float, float]] = None
    format_version: int = FORMAT_VERSION


class ObservationSpec(BaseModel):
    """Rates (μ0, μ1, μ2) and seed for synthetic pair counts."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    mu: Tuple[float, float, float]
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_rates(self):
        if min(self.mu) < 0:
            raise ValueError(f"rates must be non-negative (got {self.mu})")
        return self


class GeneratorSpec(BaseModel):
    """Named structure generator plus its keyword parameters."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["prior", "sbm", "cm", "beta", "best", "worst"]
    params: dict = Field(default_factory=dict)
    seed: int = Field(0, ge=0)


class ExperimentSpec(BaseModel):
    """
    Grid over one rate (mu1 or mu2) with the other two fixed, replicated
    observation matrices, both models.
    """
    model_config = ConfigDict(extra="forbid")

    structure_file: Optional[str] = None
    generator: Optional[GeneratorSpec] = None
    sweep: Literal["mu1", "mu2"] = "mu1"
    sweep_values: List[float] = Field(default_factory=lambda: [10.0, 20.0, 30.0, 40.0, 45.0])
    mu0: float = Field(0.01, ge=0)
    mu1: float = Field(50.0, ge=0)
    mu2: float = Field(50.0, ge=0)
    replicates: int = Field(10, gt=0)
    models: List[ModelTag] = Field(default_factory=lambda: list(MODELS))
    init_mode: Literal["mixture", "ground_truth"] = "ground_truth"
    n_pred: int = Field(200, gt=0)
    mcmc: McmcConfig = Field(default_factory=McmcConfig.desk)
    hyperparams: Hyperparams = Field(default_factory=Hyperparams)
    master_seed: int = Field(0, ge=0)
    n_workers: int = Field(1, gt=0)
    format_version: int = FORMAT_VERSION

    @model_validator(mode="after")
    def _check_source(self):
        if (self.structure_file is None) == (self.generator is None):
            raise ValueError("exactly one of structure_file / generator must be given")
        if not self.sweep_values:
            raise ValueError("sweep_values is empty")
        return self

    def grid_mu(self, value: float) -> Tuple[float, float, float]:
        if self.sweep == "mu1":
            return (self.mu0, value, self.mu2)
        return (self.mu0, self.mu1, value)


def _load_model(cls, path: str, overrides: Optional[dict] = None):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return validate_config(cls, data, overrides)


def validate_config(cls, data: dict, overrides: Optional[dict] = None):
    """Validate `data` (plus flat/nested overrides) as `cls`, raising ConfigError."""
    merged = dict(data or {})
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    try:
        return cls.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_run_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    return _load_model(RunConfig, path, overrides)


def load_experiment_spec(path: str, overrides: Optional[dict] = None) -> ExperimentSpec:
    return _load_model(ExperimentSpec, path, overrides)
