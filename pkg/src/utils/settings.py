import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

DEFAULT_MASTER_SEED = 20200101

ENV_VARS = {
    "log_level": "CHANGESCORE_LOG_LEVEL",
    "log_file": "CHANGESCORE_LOG_FILE",
    "workers": "CHANGESCORE_WORKERS",
    "master_seed": "CHANGESCORE_SEED",
}


class Settings(BaseModel):
    """Process-wide defaults read from the environment (and a ``.env`` file)."""

    model_config = ConfigDict(frozen=True)

    log_level: str = "WARNING"
    log_file: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    master_seed: int = Field(default=DEFAULT_MASTER_SEED, ge=0, lt=2**64)


def load_settings() -> Settings:
    load_dotenv()
    values = {field: os.getenv(var) for field, var in ENV_VARS.items()}
    return Settings(**{k: v for k, v in values.items() if v not in (None, "")})
