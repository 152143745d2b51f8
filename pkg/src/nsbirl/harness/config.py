"""Experiment configuration files (JSON; unknown keys are rejected)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..demonstrators import DemonstratorSpec
from ..environments import AMBIGUOUS_GAMMA, GRIDWORLD_GAMMA, RANDOM_MDP_GAMMA, TWO_STATE_GAMMA
from ..inference import InferenceModel
from ..mdp import DEFAULT_MAX_LEN


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TwoStateEnv(_Strict):
    kind: Literal["two_state"]
    epsilon: float = Field(0.1, ge=0, le=1)
    gamma: float = Field(TWO_STATE_GAMMA, ge=0, lt=1)


class AmbiguousEnv(_Strict):
    kind: Literal["ambiguous"]
    seed: int = 0
    gamma: float = Field(AMBIGUOUS_GAMMA, ge=0, lt=1)


class GridworldEnv(_Strict):
    kind: Literal["gridworld"]
    epsilon: float = Field(0.2, ge=0, le=1)
    gamma: float = Field(GRIDWORLD_GAMMA, ge=0, lt=1)
    size: int = Field(5, ge=2)
    goals: tuple[tuple[int, int], tuple[int, int]] = ((0, 4), (4, 0))
    hole: tuple[int, int] = (2, 2)


class RandomMdpEnv(_Strict):
    kind: Literal["random_mdp"]
    n_states: Literal[3, 4, 5, 6] = 3
    seed: Optional[int] = None  # None: a fresh MDP per run
    gamma: float = Field(RANDOM_MDP_GAMMA, ge=0, lt=1)


EnvironmentConfig = Annotated[Union[TwoStateEnv, AmbiguousEnv, GridworldEnv, RandomMdpEnv],
                              Field(discriminator="kind")]


class AgentConfig(_Strict):
    kind: Literal["stationary", "learner"]
    beta: float = Field(ge=0)
    lam: float = Field(0.0, ge=0, le=1)
    name: Optional[str] = None

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "stationary":
            return f"stationary_b{self.beta:g}"
        return f"learner_l{self.lam:g}_b{self.beta:g}"

    def demonstrator(self) -> DemonstratorSpec:
        return DemonstratorSpec(self.kind, self.beta, self.lam)

    def model(self) -> InferenceModel:
        return InferenceModel(self.kind, self.beta, self.lam)


class _Common(_Strict):
    environment: EnvironmentConfig
    inferrers: list[AgentConfig] = Field(min_length=1)
    n_runs: int = Field(ge=1)
    n_trajectories: int = Field(ge=1)
    max_len: int = Field(DEFAULT_MAX_LEN, ge=1)
    root_seed: int = 0
    run_offset: int = Field(0, ge=0)
    epsilon_values: Optional[list[float]] = None
    n_boot: int = Field(1000, ge=0)
    output_dir: str = "results"

    @model_validator(mode="after")
    def _check(self):
        labels = [i.label for i in self.inferrers]
        if len(set(labels)) != len(labels):
            raise ValueError(f"inferrer labels must be unique, got {labels}")
        if self.epsilon_values is not None:
            if not self.epsilon_values:
                raise ValueError("epsilon_values must not be empty")
            if self.environment.kind not in ("two_state", "gridworld"):
                raise ValueError(f"epsilon_values does not apply to {self.environment.kind}")
            if any(not 0 <= e <= 1 for e in self.epsilon_values):
                raise ValueError("epsilon values must lie in [0, 1]")
        return self


class ExperimentConfig(_Common):
    demonstrator: AgentConfig


class GridConfig(_Common):
    """Rows are demonstrators, columns are inferrers."""

    demonstrators: list[AgentConfig] = Field(min_length=1)

    def row_config(self, demonstrator: AgentConfig) -> ExperimentConfig:
        data = self.model_dump(exclude={"demonstrators"})
        data["demonstrator"] = demonstrator.model_dump()
        return ExperimentConfig.model_validate(data)


def lambda_mesh(beta: float, lambda_d: list[float], lambda_i: list[float]) -> tuple[list[AgentConfig], list[AgentConfig]]:
    """Learner rows and columns for a TD(lambda) misspecification grid."""
    if not lambda_d or not lambda_i:
        raise ConfigError("lambda lists must not be empty")
    rows = [AgentConfig(kind="learner", beta=beta, lam=l) for l in lambda_d]
    cols = [AgentConfig(kind="learner", beta=beta, lam=l) for l in lambda_i]
    return rows, cols


def load_config(path: str | Path, kind: type[_Common] | None = None) -> ExperimentConfig | GridConfig:
    """Parse a config file; ``kind=None`` accepts either an experiment or a grid."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    if kind is None:
        kind = GridConfig if isinstance(data, dict) and "demonstrators" in data else ExperimentConfig
    try:
        return kind.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
