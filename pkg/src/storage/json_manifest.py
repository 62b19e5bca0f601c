import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union


def manifest_path(report_path: Union[str, Path]) -> Path:
    path = Path(report_path)
    return path.with_name(path.name + ".manifest.json")


def write_manifest(
    report_path: Union[str, Path],
    command: str,
    params: Dict[str, Any],
    elapsed_seconds: Optional[float] = None,
    timestamp: Optional[str] = None,
) -> Path:
    """
    Sidecar for a report file. Run metadata that changes between identical
    runs (wall clock, elapsed time) lives here, never in the report itself.
    """
    manifest = {
        "command": command,
        "report": Path(report_path).name,
        "params": params,
        "updated_at": timestamp or datetime.now(timezone.utc).isoformat(),
    }
    if elapsed_seconds is not None:
        manifest["elapsed_seconds"] = round(elapsed_seconds, 3)

    path = manifest_path(report_path)
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(report_path: Union[str, Path]) -> Dict[str, Any]:
    return json.loads(manifest_path(report_path).read_text(encoding="utf-8"))
