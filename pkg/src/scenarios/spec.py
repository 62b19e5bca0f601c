from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from analysis.strategies import Bindings
from graph.dag_model import NodeKind, Role, UnsupportedPatternError, classify_baseline_role
from sem.linear_sem import LinearSem, solve_residual_variances
from utils.errors import UserInputError

DEFAULT_N = 1000
DEFAULT_REPS = 10000


class ScenarioSpec(BaseModel):
    """A solved SEM plus the exposure / baseline / follow-up bindings analysed on it."""

    model_config = ConfigDict(frozen=True)

    id: str
    description: str = ""
    sem: LinearSem
    bindings: Bindings
    n: int = Field(default=DEFAULT_N, ge=4)
    reps: int = Field(default=DEFAULT_REPS, ge=1)
    expected_role: Optional[Role] = None

    @field_validator("sem")
    @classmethod
    def _solved(cls, sem: LinearSem) -> LinearSem:
        return sem if sem.solved else solve_residual_variances(sem)

    @model_validator(mode="after")
    def _validate(self) -> "ScenarioSpec":
        for role, name in self.bindings.model_dump().items():
            if self.sem.dag.node(name).kind is not NodeKind.Observed:
                raise UserInputError(f"The {role} binding {name} must be an observed node", {role: name})
        if self.expected_role is not None and self.role is not self.expected_role:
            raise UnsupportedPatternError(
                f"Scenario {self.id}: baseline role is {self.role.value}, expected {self.expected_role.value}",
                {"scenario": self.id},
            )
        return self

    @property
    def role(self) -> Role:
        b = self.bindings
        return classify_baseline_role(self.sem.dag, b.exposure, b.baseline, b.followup)
