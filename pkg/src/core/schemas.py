from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.data.columns import DEFAULT_FEATURES

# CLI spellings -> registered family names.
FAMILY_ALIASES = {
    "logistic": "bernoulli_logit",
    "bernoulli": "bernoulli_logit",
    "binomial": "binomial_logit",
    "beta-binomial": "beta_binomial_logit",
    "beta_binomial": "beta_binomial_logit",
}


def canonical_family(name: str) -> str:
    key = name.strip().lower()
    return FAMILY_ALIASES.get(key, key)


class PriorSpec(BaseModel):
    """Normal priors on intercept and slopes; gamma(shape, rate) on the precision phi."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    intercept_mean: float = 0.0
    intercept_sd: float = Field(default=1.0, gt=0)
    slope_mean: float = 0.0
    slope_sd: float = Field(default=1.0, gt=0)
    phi_shape: float = Field(default=0.01, gt=0)
    phi_rate: float = Field(default=0.01, gt=0)

    @classmethod
    def logistic(cls) -> PriorSpec:
        return cls(intercept_mean=3.5, intercept_sd=1.0, slope_mean=0.0, slope_sd=0.5)

    @classmethod
    def beta_binomial(cls) -> PriorSpec:
        return cls(intercept_mean=0.0, intercept_sd=5.0, slope_mean=0.0, slope_sd=2.0)


class SamplerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    chains: int = Field(default=4, ge=1)
    warmup_iters: int = Field(default=1000, ge=0)
    sampling_iters: int = Field(default=1000, ge=1)
    target_accept: float = Field(default=0.8, gt=0, lt=1)
    max_tree_depth: int = Field(default=10, ge=1, le=15)
    seed: int = Field(default=1, ge=0)
    init_radius: float = Field(default=2.0, gt=0)
    adapt: bool = True
    divergence_threshold: float = Field(default=1000.0, gt=0)
    max_divergent_fraction: float = Field(default=0.25, ge=0, le=1)

    @model_validator(mode="after")
    def _warmup_long_enough(self) -> SamplerConfig:
        if self.adapt and self.warmup_iters < 150:
            raise ValueError("warmup_iters must be >= 150 when adaptation is enabled")
        return self


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str | None = None
    features: list[str] = Field(default_factory=lambda: list(DEFAULT_FEATURES))
    positive_label: str = "Not_Canceled"
    # 0 -> use every row.
    subsample_n: int = Field(default=5000, ge=0)
    subsample_seed: int = Field(default=1, ge=0)
    aggregate: bool = False


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: str = "bernoulli_logit"
    priors: PriorSpec | None = None

    @field_validator("family")
    @classmethod
    def _canonical(cls, v: str) -> str:
        return canonical_family(v)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out: str = "runs/latest"
    format: Literal["text", "csv", "structured"] = "text"


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=1000, ge=0)
    family: str = "bernoulli_logit"
    # Intercept first, then one coefficient per entry of `features`.
    beta: list[float] = Field(default_factory=lambda: [0.0])
    features: list[str] = Field(default_factory=list)
    trials: int = Field(default=1, ge=1)
    phi: float | None = Field(default=None, gt=0)
    seed: int = Field(default=1, ge=0)

    @field_validator("family")
    @classmethod
    def _canonical(cls, v: str) -> str:
        return canonical_family(v)


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run (echoed into the output directory)."""

    model_config = ConfigDict(extra="forbid")

    format_version: str = "1"
    command: Literal["fit", "summary", "compare", "predict", "simulate"] = "fit"
    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    simulate: SimulationConfig = Field(default_factory=SimulationConfig)

    @model_validator(mode="after")
    def _aggregate_needs_trials(self) -> RunConfig:
        if self.data.aggregate and self.model.family == "bernoulli_logit":
            raise ValueError(
                "data.aggregate merges rows into trial counts; use model.family binomial "
                "or beta-binomial instead of bernoulli_logit"
            )
        return self
