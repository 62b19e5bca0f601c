from pathlib import Path
from typing import Optional, Union

import pandas as pd

from simulation.dataset import ColumnFlag, Dataset
from simulation.mc_engine import ReplicationRun
from utils.errors import UserInputError
from utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"


class DatasetFileError(UserInputError):
    pass


def _to_csv(frame: pd.DataFrame, path: Optional[Union[str, Path]]) -> str:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(frame), path)
    return text


def write_dataset(data: Dataset, path: Optional[Union[str, Path]] = None, include_latent: bool = False) -> str:
    """CSV of the sample; latent columns only when asked for."""
    frame = data.frame if include_latent else data.analysis_view()
    if include_latent and any(f is ColumnFlag.Latent for f in data.flags.values()):
        logger.warning("Dataset export includes latent columns; they must not enter an analysis")
    return _to_csv(frame, path)


def read_dataset(path: Union[str, Path]) -> Dataset:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetFileError(f"Cannot read dataset {path}: {e}", {"path": str(path)}) from e
    try:
        return Dataset.from_frame(frame)
    except ValueError as e:
        raise DatasetFileError(f"Dataset {path} has non-numeric values: {e}", {"path": str(path)}) from e


def write_estimates(run: ReplicationRun, path: Union[str, Path]) -> str:
    """Tidy per-replicate estimates (scenario, replicate, seed, strategy, estimate)."""
    return _to_csv(run.to_frame(), path)
