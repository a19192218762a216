"""Experiment configuration: a flat dataclass, a `key = value` file format,
and command-line overrides.

Config files hold one assignment per line; blank lines and text after `#`
are ignored.  List-valued keys take comma-separated entries.  Unknown keys
are rejected rather than silently dropped.
"""

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import FormatError


@dataclass
class ExperimentConfig:
    # data source
    dataset_kind: str = "idx"      # "idx" or "pgm_dir"
    dataset_path: str = ""
    labels_path: str = ""          # empty: derived from dataset_path for idx
    class_map: str = ""            # pgm_dir only: 'name = label' file
    classes: list = field(default_factory=list)   # empty: keep all classes
    images_per_class: int = 0      # 0: keep all images
    resample_factor: float = 1.0   # shrink factor in (0, 1]

    # split
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    split_seed: int = 0
    max_train_samples: int = 2000

    # model
    epsilon: float = 1e-7
    max_dims: int = 20
    k_nn: int = 10

    # quantizer search
    gamma_grid: list = field(default_factory=lambda: [0.1, 1.0])
    lambda_grid: list = field(default_factory=lambda: [0.5, 2.0])
    particles: int = 5
    iterations: int = 10
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    pso_seed: int = 0
    bootstrap_size: int = 0        # 0: min(100, training set size)
    bootstrap_seed: int = 0

    # execution
    output_dir: str = "out"
    threads: int = 1
    eigenface_count: int = 18

    def __post_init__(self):
        fr = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(fr - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {fr!r}, expected 1")
        if self.dataset_kind not in ("idx", "pgm_dir"):
            raise ValueError(f"unknown dataset kind {self.dataset_kind!r}")
        if not self.gamma_grid or not self.lambda_grid:
            raise ValueError("gamma and lambda grids must be nonempty")


_LIST_KEYS = {"classes": int, "gamma_grid": float, "lambda_grid": float}


def _parse_value(name: str, text: str, target_type):
    text = text.strip()
    if name in _LIST_KEYS:
        if not text:
            return []
        return [_LIST_KEYS[name](tok) for tok in text.split(",")]
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        name, value = (part.strip() for part in line.split("=", 1))
        if name not in by_name:
            raise FormatError(f"line {lineno}: unknown config key {name!r}")
        try:
            setattr(cfg, name, _parse_value(name, value, by_name[name].type))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad value for {name!r}: {exc}") from exc
    cfg.__post_init__()
    return cfg


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def apply_overrides(cfg: ExperimentConfig, pairs: list) -> ExperimentConfig:
    """Apply 'key=value' strings on top of a parsed config."""
    return parse_config_text("\n".join(pairs), base=cfg)


def config_text(cfg: ExperimentConfig) -> str:
    """Render a config back to the file format, one key per line."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
