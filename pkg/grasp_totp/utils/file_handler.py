import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class FileHandler:
    @staticmethod
    def save_json(file_path: PathLike, data: Dict[str, Any]) -> Path:
        """Save data to JSON file; the file is replaced only after a complete write"""
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        staging = path.with_name(f".{path.name}.tmp")
        with open(staging, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, allow_nan=False)
            f.write("\n")
        staging.replace(path)
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def save_csv(file_path: PathLike, df: pd.DataFrame, significant_digits: int = 12) -> Path:
        """Write a dataframe as CSV with a fixed number of significant digits"""
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        staging = path.with_name(f".{path.name}.tmp")
        df.to_csv(staging, index=False, float_format=f"%.{significant_digits}g")
        staging.replace(path)
        logger.debug(f"Wrote {path} ({len(df)} rows)")
        return path
