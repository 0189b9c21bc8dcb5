"""
Configuration for the QRC chaotic-map toolkit.

Two layers:
  * ``QRCSettings`` - process-level settings read from the environment / ``.env``
    (output root, logging, parallelism).
  * ``ExperimentConfig`` - the resolved experiment configuration. Read from a plain
    ``key=value`` file by ``parse_config``; every default is materialized so a run
    manifest alone is enough to rerun an experiment.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from qrc_chaos.schemas.common import Boundary, Encoding, MapKind, PredictionMode, QubitOrder
from qrc_chaos.utils.errors import ConfigError

logger = logging.getLogger(__name__)

MAX_QUBITS = 12

# Reference architecture per map: (d, n_rep, n_hidden)
MAP_ARCHITECTURE_DEFAULTS: Dict[MapKind, tuple] = {
    MapKind.LOGISTIC: (2, 2, 4),
    MapKind.HENON: (1, 2, 3),
}


class QRCSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="QRC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    # Output
    out_dir: str = "results"
    save_plots: bool = True

    # Logging
    log_level: str = "INFO"
    log_file: str = "qrc_chaos.log"

    # Parallelism (joblib semantics: -1 = all cores)
    n_jobs: int = -1

    # Recorded in every manifest
    rng_algorithm: str = "numpy.random.PCG64"


settings = QRCSettings()


class ExperimentConfig(BaseModel):
    """Fully resolved experiment configuration"""

    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)

    # Map
    map_kind: MapKind = MapKind.LOGISTIC
    r: float = Field(3.75, ge=0.0, le=4.0)
    a: float = 1.4
    b: float = 0.3

    # Dataset: 100 x 20 training, 10 x 200 test
    n_train: int = Field(100, ge=1)
    train_len: int = Field(20, ge=1)
    n_test: int = Field(10, ge=1)
    test_len: int = Field(200, ge=1)
    seed: int = 7

    # Reservoir architecture (None -> per-map default)
    d: Optional[int] = Field(None, ge=1)
    n_rep: Optional[int] = Field(None, ge=1)
    n_hidden: Optional[int] = Field(None, ge=1)
    reservoir_seed: int = 1234
    coupling: float = 1.0
    tau: float = Field(1.0, gt=0.0)
    gamma: float = Field(0.0, ge=0.0)
    lindblad_substeps: int = Field(200, ge=1)
    boundary: Boundary = Boundary.OPEN
    encoding: Encoding = Encoding.PI
    qubit_order: QubitOrder = QubitOrder.GROUPED
    allow_wide_fields: bool = False

    # Readout
    epsilon: float = Field(1e-8, gt=0.0)
    include_bias: bool = False
    gap: int = Field(0, ge=0)
    eval_start: int = Field(150, ge=0)
    prediction_mode: PredictionMode = PredictionMode.TEACHER_FORCED
    clamp_predictions: bool = False

    # Lyapunov estimator
    lle_transient: int = Field(1000, ge=100)
    lle_iterations: int = Field(100_000, ge=1000)

    @model_validator(mode="after")
    def _materialize_map_defaults(self) -> "ExperimentConfig":
        d, n_rep, n_hidden = MAP_ARCHITECTURE_DEFAULTS[self.map_kind]
        if self.d is None:
            object.__setattr__(self, "d", d)
        if self.n_rep is None:
            object.__setattr__(self, "n_rep", n_rep)
        if self.n_hidden is None:
            object.__setattr__(self, "n_hidden", n_hidden)

        n_qubits = self.n_vars * self.n_rep + self.n_hidden
        if n_qubits > MAX_QUBITS:
            raise ValueError(f"n_qubits={n_qubits} exceeds the dense-kernel limit of {MAX_QUBITS}")
        if self.map_kind == MapKind.HENON and not 1.0 <= self.a <= 1.4:
            logger.warning(f"Henon a={self.a} lies outside the studied range [1, 1.4]")
        return self

    @property
    def n_vars(self) -> int:
        return 1 if self.map_kind == MapKind.LOGISTIC else 2

    @property
    def control_value(self) -> float:
        return self.r if self.map_kind == MapKind.LOGISTIC else self.a

    def map_params(self, control: Optional[float] = None):
        """MapParams for this config, optionally at a different control value"""
        from qrc_chaos.schemas.chaos import MapParams

        if self.map_kind == MapKind.LOGISTIC:
            return MapParams(kind=self.map_kind, r=self.r if control is None else control)
        return MapParams(kind=self.map_kind, a=self.a if control is None else control, b=self.b)

    def reservoir_config(self, **overrides: Any):
        """ReservoirConfig for this experiment; overrides replace individual fields"""
        from qrc_chaos.schemas.reservoir import ReservoirConfig

        values = dict(
            d=self.d,
            n_rep=self.n_rep,
            n_vars=self.n_vars,
            n_hidden=self.n_hidden,
            tau=self.tau,
            gamma=self.gamma,
            coupling=self.coupling,
            boundary=self.boundary,
            encoding=self.encoding,
            qubit_order=self.qubit_order,
            seed=self.reservoir_seed,
            include_bias=self.include_bias,
            lindblad_substeps=self.lindblad_substeps,
            allow_wide_fields=self.allow_wide_fields,
        )
        values.update(overrides)
        return ReservoirConfig(**values)


def read_config_file(path: str | Path) -> Dict[str, str]:
    """
    Read a ``key=value`` config file (dotenv syntax, ``#`` comments allowed).

    Raises:
        ConfigError: missing file, or a statement that does not parse (with line/column)
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    values: Dict[str, str] = {}
    with open(path, encoding="utf-8") as stream:
        for binding in parse_stream(stream):
            if binding.error:
                statement = binding.original.string.rstrip("\n")
                raise ConfigError(
                    f"{path}: parse error at line {binding.original.line}, column 1: {statement!r}"
                )
            if binding.key is None:
                continue
            values[binding.key.strip().lower()] = binding.value if binding.value is not None else ""
    logger.debug(f"Read {len(values)} config keys from {path}")
    return values


def read_manifest_file(path: str | Path) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """
    Read the resolved config and the recorded subcommand arguments of a run's manifest.json

    Raises:
        ConfigError: missing file, invalid JSON or no ``config`` section
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON (line {e.lineno}): {e.msg}") from e
    if not isinstance(manifest, dict) or not isinstance(manifest.get("config"), dict):
        raise ConfigError(f"{path}: manifest has no 'config' section")
    arguments = manifest.get("arguments") or {}
    logger.debug(f"Read {len(manifest['config'])} config keys and {len(arguments)} arguments from {path}")
    return dict(manifest["config"]), dict(arguments)


def format_config(config: ExperimentConfig) -> str:
    """Resolved config as ``key=value`` lines that ``parse_config`` reads back unchanged"""
    lines = []
    for key, value in config.model_dump(mode="json").items():
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_config_file(config: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(format_config(config), encoding="utf-8")
    return path


def resolve_config(values: Dict[str, Any]) -> ExperimentConfig:
    """Validate raw values into an ExperimentConfig, converting errors to ConfigError"""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        problems = []
        for err in e.errors():
            field = ".".join(str(part) for part in err["loc"]) or "config"
            if err["type"] == "extra_forbidden":
                problems.append(f"unknown key '{field}'")
            else:
                problems.append(f"{field}: {err['msg']}")
        raise ConfigError("Invalid configuration: " + "; ".join(problems)) from e


def parse_config(path: Optional[str | Path] = None) -> ExperimentConfig:
    """Parse a config file into a fully resolved ExperimentConfig (no file -> defaults)"""
    values = read_config_file(path) if path else {}
    config = resolve_config(values)
    logger.info(f"Resolved configuration for {config.map_kind.value} map")
    return config
