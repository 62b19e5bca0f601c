from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from scenarios.spec import DEFAULT_N, DEFAULT_REPS
from utils.settings import DEFAULT_MASTER_SEED, Settings

OUTPUT_FORMATS = ("json", "csv", "markdown")
TABLE_COMMANDS = ("replicate", "table1")


class CliConfig(BaseModel):
    """Common flags of one invocation, after defaults from the environment are applied."""

    model_config = ConfigDict(frozen=True)

    command: str
    seed: int = Field(default=DEFAULT_MASTER_SEED, ge=0, lt=2**64)
    reps: int = Field(default=DEFAULT_REPS, ge=1)
    n: int = Field(default=DEFAULT_N, ge=0)
    out: Optional[str] = None
    format: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    include_latent: bool = False
    estimates_out: Optional[str] = None
    scenarios: Tuple[str, ...] = ()

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        return "markdown" if self.command in TABLE_COMMANDS else "json"

    @classmethod
    def from_args(cls, args, settings: Settings) -> "CliConfig":
        values = {
            "command": args.command,
            "seed": settings.master_seed if getattr(args, "seed", None) is None else args.seed,
            "workers": settings.workers if getattr(args, "workers", None) is None else args.workers,
        }
        for name in ("reps", "n", "out", "format", "include_latent", "estimates_out"):
            value = getattr(args, name, None)
            if value is not None:
                values[name] = value
        if getattr(args, "scenarios", None):
            values["scenarios"] = tuple(args.scenarios)
        return cls(**values)
