from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

import numpy as np

TOOL_NAME = "pyoptswitch"


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays & tuples to plain JSON values"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a run configuration

    Parameters
    ----------
    config : Mapping[str, Any]
        Run configuration (problem dict, grid, scheme, tolerances, seeds, ...)

    Returns
    -------
    digest : str
        Hex digest
    """
    text = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def output_header(digest: str = "") -> Dict[str, str]:
    """Header block stamped into every output file

    Parameters
    ----------
    digest : str, optional
        Config hash of the run

    Returns
    -------
    header : Dict[str, str]
        Tool name, tool version, config hash
    """
    from pyoptswitch import __version__

    return {"tool": TOOL_NAME, "version": __version__, "config_hash": digest}


def header_lines(header: Mapping[str, str]) -> List[str]:
    """Header block as `# key: value` comment lines"""
    return [f"# {k}: {v}" for k, v in header.items()]


def write_json(
    data: Mapping[str, Any],
    outfile: Union[str, Path],
    header: Mapping[str, str],
) -> None:
    """Write report as JSON with a leading `header` block

    Parameters
    ----------
    data : Mapping[str, Any]
        Report contents
    outfile : Union[str, Path]
        Output file path
    header : Mapping[str, str]
        Output header (see `output_header`)
    """
    output = {"header": dict(header)}
    output.update(_jsonable(dict(data)))
    with open(outfile, "w", encoding="utf-8") as f:
        json.dump(output, f, indent=2)


def max_process_num() -> int:
    """Max process number"""
    cpu_num = os.cpu_count()
    return 1 if cpu_num is None or cpu_num == 1 else cpu_num - 1
