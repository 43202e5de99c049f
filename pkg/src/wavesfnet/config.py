"""Model configuration, the per-dataset presets, and the flat key=value run config."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

VARIANTS = ("full", "spatial_only", "frequency_only", "no_tdi", "conv_codec", "mlp_mixer")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_s: int = 1
    n_t: int = 2
    c_s: int = 16
    c_z: int = 8
    channels: int = 1
    height: int = 16
    width: int = 16
    t_in: int = 4
    t_out: int = 4
    variant: str = "full"
    droppath_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_s", "n_t", "c_s", "c_z", "channels", "height", "width", "t_in", "t_out"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        factor = 2 ** self.n_s
        if self.height % factor or self.width % factor:
            raise ConfigError(f"frame {self.height}x{self.width} not divisible by 2**n_s = {factor}")
        if not 0.0 <= self.droppath_rate < 1.0:
            raise ConfigError(f"droppath_rate must be in [0, 1), got {self.droppath_rate}")

    @property
    def c_t(self) -> int:
        return self.t_in * self.c_z

    @property
    def latent_hw(self) -> tuple[int, int]:
        return self.height >> self.n_s, self.width >> self.n_s

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.channels, self.height, self.width

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TablePreset:
    """One row of the per-dataset experimental configuration table."""

    name: str
    n_s: int
    n_t: int
    c_s: int
    c_t: int
    frame: tuple[int, int, int]
    batch_size: int
    t_in: int
    t_out: int
    lr: float
    epochs: int
    schedule: str

    @property
    def c_z(self) -> int:
        if self.c_t % self.t_in:
            raise ConfigError(f"{self.name}: C_t={self.c_t} not divisible by T_in={self.t_in}")
        return self.c_t // self.t_in

    def model_config(self, **overrides) -> ModelConfig:
        c, h, w = self.frame
        base = dict(n_s=self.n_s, n_t=self.n_t, c_s=self.c_s, c_z=self.c_z, channels=c, height=h,
                    width=w, t_in=self.t_in, t_out=self.t_out)
        base.update(overrides)
        return ModelConfig(**base)


PRESETS: dict[str, TablePreset] = {p.name: p for p in (
    TablePreset("mmnist", 2, 8, 64, 720, (1, 64, 64), 16, 10, 10, 9.2e-4, 2000, "onecycle"),
    TablePreset("taxibj", 1, 8, 32, 192, (2, 32, 32), 16, 4, 4, 1.5e-3, 50, "cosine"),
    TablePreset("weather_t2m", 1, 8, 32, 264, (1, 32, 64), 16, 12, 12, 2e-3, 50, "cosine"),
    TablePreset("weather_tcc", 1, 8, 32, 264, (1, 32, 64), 16, 12, 12, 4e-3, 50, "cosine"),
    TablePreset("weather_uv10", 1, 8, 32, 264, (2, 32, 64), 16, 12, 12, 2e-3, 50, "cosine"),
    TablePreset("weather_r", 1, 8, 32, 264, (1, 32, 64), 16, 12, 12, 3e-3, 50, "cosine"),
    TablePreset("weather_mv", 1, 8, 32, 264, (12, 32, 64), 16, 4, 4, 3e-3, 50, "cosine"),
)}


# -- flat run config -----------------------------------------------------------

_MODEL_KEYS = {f.name: f.type for f in fields(ModelConfig)}


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    # training
    lr: float = 1e-3
    epochs: int = 1
    steps: int | None = None
    batch_size: int = 16
    schedule: str = "onecycle"
    eval_every: int = 10
    grad_clip: float | None = None
    shuffle_seed: int = 0
    # data: either a directory of train/val/test .wsft files or the generator
    data_dir: str | None = None
    data_seed: int = 0
    n_sequences: int = 16
    n_eval_sequences: int = 8
    n_objects: int = 2
    object_size: int | None = None
    output_dir: str = "runs/default"
    preset: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        return d


_RUN_KEYS = {f.name: f.type for f in fields(RunConfig) if f.name != "model"}


def _coerce(key: str, raw: str, typ):
    typ = str(typ)
    raw = raw.strip()
    if raw.lower() in ("none", "null", "") and "None" in typ:
        return None
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        if typ.startswith("bool"):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ}") from None
    return raw


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse `key = value` lines (``#`` starts a comment).

    A `preset = <name>` line seeds model and training fields from the
    per-dataset table; explicit keys override it.
    """
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _MODEL_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = raw

    model_kwargs: dict = {}
    run_kwargs: dict = {}
    preset_name = values.get("preset")
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"key 'preset': unknown preset {preset_name!r}")
        p = PRESETS[preset_name]
        model_kwargs.update(p.model_config().to_dict())
        run_kwargs.update(lr=p.lr, epochs=p.epochs, batch_size=p.batch_size, schedule=p.schedule)
    for key, raw in values.items():
        if key in _MODEL_KEYS:
            model_kwargs[key] = _coerce(key, raw, _MODEL_KEYS[key])
        else:
            run_kwargs[key] = _coerce(key, raw, _RUN_KEYS[key])
    try:
        model = ModelConfig(**model_kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = RunConfig(model=model, **run_kwargs)
    if cfg.schedule not in ("onecycle", "cosine", "constant"):
        raise ConfigError(f"{source}: key 'schedule': unknown schedule {cfg.schedule!r}")
    for key in ("batch_size", "epochs", "n_sequences", "n_eval_sequences"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{source}: key {key!r} must be >= 1")
    if cfg.steps is not None and cfg.steps < 1:
        raise ConfigError(f"{source}: key 'steps' must be >= 1")
    if not cfg.lr > 0:
        raise ConfigError(f"{source}: key 'lr' must be positive")
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(), source=str(path))
