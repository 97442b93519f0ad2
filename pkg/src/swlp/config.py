"""Experiment configuration (JSON, schema ``swlp-config-v1``)."""
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace

CONFIG_SCHEMA = "swlp-config-v1"
INSTANCES = ("scalar", "heat", "schrodinger", "custom-json")
SUITES = ("exact", "oracles", "weak", "picard", "energy", "multiplier", "duality", "wellposed", "reproducibility")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def as_json(self):
        return json.dumps({"error": "config", "field": self.field, "message": str(self)}, sort_keys=True)


@dataclass(frozen=True)
class ExperimentConfig:
    """One run of the harness.

    ``params`` holds instance settings (scalar: a, b, c, f1, sigma, y0, u;
    heat: length, cells, a, b, u; schrodinger: modes, a, b, sides, u;
    custom-json: system). ``nodes`` lists admissibility/gain nodes;
    ``export_paths`` caps the paths written to the trajectory CSV.
    """

    instance: str
    horizon: float = 1.0
    steps: int = 256
    paths: int = 10_000
    seed: int = 0
    trials: int = 8
    refinement_levels: int = 2
    output_dir: str = "swlp-out"
    suites: tuple = SUITES
    params: dict = field(default_factory=dict)
    nodes: tuple = ()
    export_paths: int = 16

    def digest(self):
        """Hash of everything except the output location."""
        d = asdict(self)
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=list).encode()).hexdigest()[:16]

    def to_dict(self):
        d = asdict(self)
        d["schema"] = CONFIG_SCHEMA
        d["suites"] = list(self.suites)
        d["nodes"] = list(self.nodes)
        return d


def _positive_int(d, key, default):
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{key} must be a positive integer, got {value!r}", key)
    return value


def parse_config(d, base_dir="."):
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    schema = d.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}", "schema")
    unknown = set(d) - {"schema", "instance", "grid", "paths", "seed", "trials", "refinement_levels",
                        "output_dir", "suites", "params", "nodes", "export_paths"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", sorted(unknown)[0])
    instance = d.get("instance")
    if instance not in INSTANCES:
        raise ConfigError(f"instance must be one of {INSTANCES}, got {instance!r}", "instance")
    grid = d.get("grid", {})
    horizon = grid.get("T", 1.0)
    if not isinstance(horizon, (int, float)) or isinstance(horizon, bool) or not horizon > 0:
        raise ConfigError(f"grid.T must be positive, got {horizon!r}", "grid.T")
    steps = _positive_int(grid, "N", 256)
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}", "seed")
    suites = tuple(d.get("suites", SUITES))
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise ConfigError(f"unknown suites {bad}", "suites")
    params = dict(d.get("params", {}))
    if instance == "custom-json":
        if "system" not in params:
            raise ConfigError("custom-json instance needs params.system", "params.system")
        params["system"] = os.path.normpath(os.path.join(base_dir, params["system"]))
        if not os.path.isfile(params["system"]):
            raise ConfigError(f"system file {params['system']} not found", "params.system")
    nodes = tuple(int(k) for k in d.get("nodes", ()))
    if any(not 0 < k <= steps for k in nodes) or list(nodes) != sorted(set(nodes)):
        raise ConfigError("nodes must be strictly increasing and within 1..N", "nodes")
    return ExperimentConfig(
        instance=instance, horizon=float(horizon), steps=steps,
        paths=_positive_int(d, "paths", 10_000), seed=seed, trials=_positive_int(d, "trials", 8),
        refinement_levels=_positive_int(d, "refinement_levels", 2),
        output_dir=str(d.get("output_dir", "swlp-out")), suites=suites, params=params, nodes=nodes,
        export_paths=_positive_int(d, "export_paths", 16),
    )


def load_config(path, seed=None, output_dir=None):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", "config") from None
    if isinstance(raw, dict):
        if seed is not None:
            raw["seed"] = seed
        if output_dir is not None:
            raw["output_dir"] = output_dir
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))


def ensure_output_dir(cfg):
    """Create ``output_dir`` and prove it is writable, before any computation."""
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=cfg.output_dir):
            pass
    except OSError as exc:
        raise ConfigError(f"output_dir {cfg.output_dir!r} is not writable: {exc}", "output_dir") from None
    return cfg.output_dir


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
