"""Flat ``key = value`` experiment configuration.

Keys use dotted section prefixes (``training.alpha = 0.01``). Blank lines
and ``#`` comments are ignored. Every value has a default, so an empty file
describes the reference experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .device import DeviceParams, NoiseFlags, param_violations
from .network import NetworkLayout
from .training import TrainingConfig

VARIANTS = ("digital", "crossbar_ideal", "crossbar_noisy")
DEFAULT_SNAPSHOTS = (0, 10, 50, 100, 200)

_DEVICE_KEYS = ("g_min", "g_max", "a_set", "a_reset", "gamma", "sigma_d2d", "sigma_c2c", "sigma_read")
_TRAINING_FLOATS = ("alpha", "eta", "g2w_ratio", "v_set", "v_reset", "t_p", "saturation_margin")
_NOISE_KEYS = {"noise.d2d": "d2d_enabled", "noise.c2c": "c2c_enabled", "noise.read": "read_noise_enabled"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


def parse_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"line {lineno}: expected 'key = value', got {line!r}"])
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def read_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    return parse_text(text)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "crossbar_ideal"
    device: DeviceParams = field(default_factory=DeviceParams)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    layout: NetworkLayout = field(default_factory=NetworkLayout)
    data_path: str = ""  # empty -> bundled dataset
    output_dir: str = "runs/out"
    replicas: int = 1
    seed: int = 0
    snapshot_epochs: tuple[int, ...] = DEFAULT_SNAPSHOTS
    # Explicit per-source noise overrides; None leaves the variant default.
    noise_overrides: tuple = (None, None, None)

    @property
    def flags(self) -> NoiseFlags:
        if self.variant == "crossbar_noisy":
            base = [True, True, True]
            for k, v in enumerate(self.noise_overrides):
                if v is not None:
                    base[k] = v
            return NoiseFlags(*base)
        return NoiseFlags()

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=seed, training=replace(self.training, seed=seed))

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> ExperimentConfig:
        """Build and validate; every problem is collected before raising."""
        problems: list[str] = []
        known = set()

        def get(key, conv, default):
            known.add(key)
            if key not in m:
                return default
            try:
                return conv(m[key])
            except ValueError as exc:
                problems.append(f"{key}: {exc}")
                return default

        variant = get("variant", str, "crossbar_ideal")
        if variant not in VARIANTS:
            problems.append(f"variant: must be one of {VARIANTS}, got {variant!r}")
        seed = get("seed", int, 0)
        replicas = get("replicas", int, 1)
        if replicas < 1:
            problems.append(f"replicas: must be >= 1, got {replicas}")
        data_path = get("data_path", str, "")
        output_dir = get("output_dir", str, "runs/out")
        snaps = get("snapshot_epochs", lambda s: tuple(int(x) for x in s.split(",") if x.strip()), DEFAULT_SNAPSHOTS)
        if any(e < 0 for e in snaps):
            problems.append("snapshot_epochs: must be non-negative")

        dev_kw = {k: get(f"device.{k}", float, getattr(DeviceParams, k)) for k in _DEVICE_KEYS}
        tr_kw = {k: get(f"training.{k}", float, getattr(TrainingConfig, k)) for k in _TRAINING_FLOATS}
        tr_kw["epochs"] = get("training.epochs", int, TrainingConfig.epochs)
        tr_kw["granularity"] = get("training.granularity", str, TrainingConfig.granularity)
        v_read = get("layout.v_read", float, NetworkLayout.v_read)
        overrides = tuple(get(k, _bool, None) for k in _NOISE_KEYS)

        for key in sorted(set(m) - known):
            problems.append(f"{key}: unknown key")

        dev_kw["v_set"], dev_kw["v_reset"] = tr_kw["v_set"], tr_kw["v_reset"]
        # v_set/v_reset problems are already reported under training.*
        problems.extend(p for p in param_violations(dev_kw) if not p.startswith("device.v_set"))

        training = TrainingConfig(flags=NoiseFlags(), seed=seed, **tr_kw)
        problems.extend(training.violations())
        if not 0 < v_read <= 0.2:
            problems.append(f"layout.v_read: must be in (0, 0.2] V, got {v_read}")
        if problems:
            raise ConfigError(problems)

        layout = NetworkLayout(v_read=v_read, g2w_ratio=training.g2w_ratio)
        cfg = cls(
            variant=variant,
            device=DeviceParams(**dev_kw),
            training=training,
            layout=layout,
            data_path=data_path,
            output_dir=output_dir,
            replicas=replicas,
            seed=seed,
            snapshot_epochs=snaps,
            noise_overrides=overrides,
        )
        return replace(cfg, training=replace(training, flags=cfg.flags))

    def to_mapping(self) -> dict[str, str]:
        """Flat echo that :meth:`from_mapping` turns back into an equal config."""
        m = {
            "variant": self.variant,
            "seed": str(self.seed),
            "replicas": str(self.replicas),
            "data_path": self.data_path,
            "output_dir": self.output_dir,
            "snapshot_epochs": ",".join(str(e) for e in self.snapshot_epochs),
        }
        for k in _DEVICE_KEYS:
            m[f"device.{k}"] = repr(getattr(self.device, k))
        for k in _TRAINING_FLOATS:
            m[f"training.{k}"] = repr(getattr(self.training, k))
        m["training.epochs"] = str(self.training.epochs)
        m["training.granularity"] = self.training.granularity
        m["layout.v_read"] = repr(self.layout.v_read)
        for key, v in zip(_NOISE_KEYS, self.noise_overrides):
            if v is not None:
                m[key] = "true" if v else "false"
        return m

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_mapping().items())


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a config file (optional) and apply CLI-style overrides on top."""
    m = read_file(path) if path else {}
    for key, value in overrides.items():
        if value is not None:
            m[key] = str(value)
    return ExperimentConfig.from_mapping(m)

