"""JSON run configuration."""

import json
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigurationError
from .catalog import catalog_entry

MODELS = ("bbm", "eb")
REDUCTIONS = ("fom", "pdrom", "eimrom", "phi_only")


@dataclass
class SnapshotSchedule:
    n_snapshots: int = 1000
    n_draws: int = 0
    ranges: dict = None
    t_end: float = None


@dataclass
class OnlineSpec:
    t_end: float = None
    preset: str = "in_training"
    overrides: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    """One experiment.  ``overrides`` go to the benchmark constructor."""

    model: str = "bbm"
    benchmark: str = "monochromatic"
    overrides: dict = field(default_factory=dict)
    reduction: str = "fom"
    mode: str = None
    variant: str = "psi"
    tol_pod: float = None
    n_rb: int = None
    tol_eim: float = None
    n_eim: int = None
    snapshots: SnapshotSchedule = None
    online: OnlineSpec = field(default_factory=OnlineSpec)
    n_out: int = 11
    seed: int = 0
    out: str = None
    artifacts: str = None
    repeats: int = 1
    blowup_factor: float = 10.0
    sweep: dict = None
    study: dict = None

    def __post_init__(self):
        if isinstance(self.snapshots, dict):
            self.snapshots = SnapshotSchedule(**self.snapshots)
        if isinstance(self.online, dict):
            self.online = OnlineSpec(**self.online)
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}")
        entry = catalog_entry(self.model, self.benchmark)
        if self.reduction not in REDUCTIONS:
            raise ConfigurationError(f"reduction must be one of {REDUCTIONS}")
        if self.mode is None:
            self.mode = entry["mode"]
        if self.mode not in ("galerkin", "energy"):
            raise ConfigurationError("mode must be 'galerkin' or 'energy'")
        if self.variant not in ("psi", "fused"):
            raise ConfigurationError("variant must be 'psi' or 'fused'")
        if self.reduction == "phi_only" and self.model != "bbm":
            raise ConfigurationError("phi_only is defined for the BBM model only")
        if self.reduction != "fom" and self.artifacts is None and self.snapshots is None:
            raise ConfigurationError("a reduced run needs an artifact path or a snapshots section")
        if self.tol_pod is not None and not 0 < self.tol_pod < 1:
            raise ConfigurationError("tol_pod must lie in (0, 1)")
        if self.tol_eim is not None and not self.tol_eim > 0:
            raise ConfigurationError("tol_eim must be positive")
        for name in ("n_rb", "n_eim"):
            val = getattr(self, name)
            if val is not None and int(val) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if self.reduction != "fom" and self.tol_pod is None and self.n_rb is None:
            raise ConfigurationError("give tol_pod or n_rb for a reduced run")
        if self.reduction == "eimrom" and self.tol_eim is None and self.n_eim is None:
            raise ConfigurationError("give tol_eim or n_eim for an EIM run")
        if self.snapshots is not None and self.snapshots.n_snapshots < 1:
            raise ConfigurationError("n_snapshots must be at least 1")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")

    def to_dict(self):
        return asdict(self)

    def training_ranges(self):
        if self.snapshots is None or self.snapshots.n_draws == 0:
            return {}
        if self.snapshots.ranges:
            return {k: tuple(v) for k, v in self.snapshots.ranges.items()}
        return dict(catalog_entry(self.model, self.benchmark)["training"])


_FLAG_FIELDS = {"seed": "seed", "tol_pod": "tol_pod", "tol_eim": "tol_eim", "nrb": "n_rb",
                "neim": "n_eim", "out": "out"}


def load_config(path=None, text=None, cli=None):
    """Read a JSON document and apply command-line overrides (``cli`` is a dict)."""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text) if text else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")
    for flag, name in _FLAG_FIELDS.items():
        if cli and cli.get(flag) is not None:
            doc[name] = cli[flag]
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
