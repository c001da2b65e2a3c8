"""CSV matrices with an artifact header comment on the first line."""

import json
from pathlib import Path
from typing import Optional

import pandas as pd

from attriqa.errors import DataError, ParseError
from attriqa.util.artifacts import ArtifactHeader
from attriqa.util.digests import sha256_file

FLOAT_FORMAT = "%.12g"


def write_matrix(df: pd.DataFrame, path: Path | str, header: ArtifactHeader) -> str:
    """'# {header json}' then the CSV body; returns the file digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# " + header.model_dump_json() + "\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return sha256_file(path)


def read_matrix(path: Path | str, require_header: bool = True) -> tuple[Optional[ArtifactHeader], pd.DataFrame]:
    """Header and body; hand-written files may omit the header when not required."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path} not found")
    header = None
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if first.startswith("# "):
            try:
                header = ArtifactHeader.model_validate(json.loads(first[2:]))
            except ValueError as e:
                raise ParseError(f"bad artifact header: {e}", line=1, path=path) from None
        elif require_header:
            raise ParseError("missing artifact header comment", line=1, path=path)
        else:
            f.seek(0)
        df = pd.read_csv(f, dtype={"record_id": str})
    if "record_id" not in df.columns:
        raise DataError(f"{path}: no record_id column")
    return header, df
