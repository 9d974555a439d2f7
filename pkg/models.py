import json
import logging
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from utils import __version__
from utils.errors import InvalidConfigurationError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'

_INT_FIELDS = {'n', 'max_iter', 'steps', 'workers'}
_FLOAT_FIELDS = {'q', 'rho', 'tol', 'R', 'r0', 'rho_start', 'rho_end'}
_FLOAT_LIST_FIELDS = {'eps', 'r'}
_STRING_FIELDS = {'subcommand', 'input', 'out'}


@dataclass
class RunConfig:
    """Validated parameters of one command line run.

    Unset values stay None so each subcommand can apply its own default.
    """
    subcommand: Optional[str] = None
    n: Optional[int] = None
    q: Optional[float] = None
    rho: Optional[float] = None
    eps: Optional[List[float]] = None
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    r: Optional[List[float]] = None
    R: Optional[float] = None
    r0: Optional[float] = None
    rho_start: Optional[float] = None
    rho_end: Optional[float] = None
    steps: Optional[int] = None
    input: Optional[str] = None
    out: Optional[str] = None
    workers: Optional[int] = None

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        if not isinstance(data, dict):
            raise InvalidConfigurationError(f"configuration must be a JSON object, got {type(data).__name__}")
        known = set(cls.field_names())
        for key in data:
            if key not in known:
                raise InvalidConfigurationError(f"unknown configuration key '{key}'", details={'key': key})
        return cls(**{key: _coerce(key, value) for key, value in data.items()})

    def merged(self, overrides: Dict[str, Any]) -> 'RunConfig':
        """Copy with every non-None override applied (command line wins)."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            flags = ', '.join('--' + name.replace('_', '-') for name in missing)
            raise InvalidConfigurationError(f"{self.subcommand} requires {flags}", details={'missing': missing})


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidConfigurationError(f"configuration key '{key}' must be an integer, got {value!r}",
                                            details={'key': key})
        return value
    if key in _FLOAT_FIELDS:
        return _as_float(key, value)
    if key in _FLOAT_LIST_FIELDS:
        items = value if isinstance(value, list) else [value]
        return [_as_float(key, item) for item in items]
    if key in _STRING_FIELDS:
        if not isinstance(value, str):
            raise InvalidConfigurationError(f"configuration key '{key}' must be a string, got {value!r}",
                                            details={'key': key})
        return value
    return value


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfigurationError(f"configuration key '{key}' must be a number, got {value!r}",
                                        details={'key': key})
    return float(value)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise InvalidConfigurationError(f"cannot read configuration file {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidConfigurationError(f"configuration file {path} is not valid JSON at byte offset {e.pos}: {e.msg}",
                                        details={'offset': e.pos})
    config = RunConfig.from_dict(data)
    logger.info(f"Loaded configuration from {path}")
    return config


@dataclass
class RunManifest:
    config: Dict[str, Any]
    version: str
    duration_seconds: float
    status: str
    exit_code: int
    output: Optional[str] = None
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigurationError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def read(cls, path: Union[str, Path]) -> 'RunManifest':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def manifest_path(output: Union[str, Path]) -> Path:
    return Path(str(output) + MANIFEST_SUFFIX)


def write_manifest(output: Union[str, Path], manifest: RunManifest) -> Path:
    path = manifest_path(output)
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True, default=_json_default) + '\n',
                    encoding='utf-8')
    logger.info(f"Wrote run manifest {path}")
    return path


def _json_default(value: Any) -> Any:
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'item'):
        return value.item()
    return str(value)


def artifact_version() -> str:
    return __version__
