"""Layered run configuration: defaults < config file < command-line flags.

The config file is plain ``key=value`` text ('#' starts a comment).  Every
ablation axis (reference selection at train/test, auxiliary classification,
latent loss, head dimension) is a switch here, so any ablation row is
reachable without code edits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .losses import CircleParams, LossWeights
from .training import TrainConfig


class ConfigError(Exception):
    """Bad key, value, or file in a run configuration."""


_TRUE = {"on", "true", "1", "yes"}
_FALSE = {"off", "false", "0", "no"}


def parse_bool(raw: str) -> bool:
    low = str(raw).strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"expected on/off boolean, got {raw!r}")


def _opt_int(raw):
    return None if raw in (None, "", "none") else int(raw)


_CASTERS = {
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "seed": int,
    "dtype": str,
    "image_size": int,
    "base_width": int,
    "head_dim": int,
    "disc_width": _opt_int,
    "rs_train": parse_bool,
    "rs_test": parse_bool,
    "enable_cls": parse_bool,
    "enable_latent": parse_bool,
    "checkpoint_every": int,
    "max_steps": int,
    "lambda_recon": float,
    "lambda_perc": float,
    "lambda_dist": float,
    "lambda_latent": float,
    "lambda_cls": float,
    "lambda_adv": float,
    "circle_margin": float,
    "circle_scale": float,
    "m_prime": int,
    "content_font": str,
    "binarize_threshold": float,
}

_WEIGHT_KEYS = {
    "lambda_recon": "recon",
    "lambda_perc": "perc",
    "lambda_dist": "dist",
    "lambda_latent": "latent",
    "lambda_cls": "cls",
    "lambda_adv": "adv",
}


@dataclass
class RunConfig:
    train: TrainConfig
    m_prime: int = 10
    content_font: str | None = None
    binarize_threshold: float = 0.5


def read_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CASTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_run_config(
    file_values: dict | None = None, flag_values: dict | None = None
) -> RunConfig:
    """Merge layers (later wins) and construct the typed configuration."""
    merged: dict = {}
    for layer in (file_values or {}, flag_values or {}):
        for key, value in layer.items():
            if value is None:
                continue
            if key not in _CASTERS:
                raise ConfigError(f"unknown configuration key {key!r}")
            caster = _CASTERS[key]
            try:
                merged[key] = caster(value) if isinstance(value, str) else value
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc

    weights = LossWeights(
        **{attr: merged.pop(key) for key, attr in _WEIGHT_KEYS.items() if key in merged}
    )
    circle = CircleParams(
        **{
            attr: merged.pop(key)
            for key, attr in (("circle_margin", "margin"), ("circle_scale", "scale"))
            if key in merged
        }
    )
    extras = {
        "m_prime": merged.pop("m_prime", 10),
        "content_font": merged.pop("content_font", None),
        "binarize_threshold": merged.pop("binarize_threshold", 0.5),
    }
    try:
        train = TrainConfig(weights=weights, circle=circle, **merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(train=train, **extras)
