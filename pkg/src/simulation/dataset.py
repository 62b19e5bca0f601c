from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import UserInputError


class MissingColumnError(UserInputError):
    pass


class ColumnFlag(str, Enum):
    Observed = "observed"
    Latent = "latent"
    Derived = "derived"


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_id: Optional[str] = None
    seed: Optional[int] = None
    n: int = Field(ge=0)


def combine_columns(columns: Mapping, terms: Tuple[Tuple[str, float], ...]) -> np.ndarray:
    """Fixed linear combination of columns, summed in ``terms`` order."""
    out = None
    for name, weight in terms:
        term = weight * np.asarray(columns[name], dtype=float)
        out = term if out is None else out + term
    return out


class Dataset(BaseModel):
    """
    An n-row sample. Derived columns record the linear combination that
    defines them and must reproduce it exactly; latent columns never reach an
    analysis.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frame: pd.DataFrame
    flags: Dict[str, ColumnFlag]
    derivations: Dict[str, Tuple[Tuple[str, float], ...]] = Field(default_factory=dict)
    provenance: Provenance

    @model_validator(mode="after")
    def _schema(self) -> "Dataset":
        if list(self.frame.columns) != list(self.flags):
            raise UserInputError("Dataset flags must name every column, in order")
        for name, terms in self.derivations.items():
            if self.flags.get(name) is not ColumnFlag.Derived:
                raise UserInputError(f"Derivation given for non-derived column {name}")
            if not np.array_equal(self.frame[name].to_numpy(), combine_columns(self.frame, terms)):
                raise UserInputError(f"Derived column {name} does not match its definition")
        return self

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, scenario_id: Optional[str] = None) -> "Dataset":
        """Wrap an external table: every column is treated as observed."""
        frame = frame.astype(float)
        return cls(
            frame=frame,
            flags={c: ColumnFlag.Observed for c in frame.columns},
            provenance=Provenance(scenario_id=scenario_id, n=len(frame)),
        )

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> list:
        return list(self.frame.columns)

    def analysis_view(self) -> pd.DataFrame:
        keep = [c for c, flag in self.flags.items() if flag is not ColumnFlag.Latent]
        return self.frame[keep]

    def analysis_column(self, name: str) -> np.ndarray:
        if name not in self.flags:
            raise MissingColumnError(f"Column {name} not found; available: {', '.join(self.columns)}", {"column": name})
        if self.flags[name] is ColumnFlag.Latent:
            raise MissingColumnError(f"Column {name} is latent and cannot enter an analysis", {"column": name})
        return self.frame[name].to_numpy(dtype=float)
