"""Flat ``key = value`` run configuration."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional

from .emission import EmissionTimeModel, WindowConfig
from .errors import ParseError
from .link import LinkParams
from .protocol import SettingsMap
from .quantum import MeasurementConvention

_LINK_KEYS = {f.name for f in fields(LinkParams)}
_MODEL_KEYS = {f.name for f in fields(EmissionTimeModel)}
_WINDOW_KEYS = {"t_s_ns", "t_e_ns"}
_CONV_KEYS = {"bob_angle_sign", "bob_angle_offset_deg"}
_RUN_KEYS = {"seed", "rounds", "alpha_deg", "beta_deg", "ledger_out", "penalty_c"}
KNOWN_KEYS = _LINK_KEYS | _MODEL_KEYS | _WINDOW_KEYS | _CONV_KEYS | _RUN_KEYS


@dataclass(frozen=True)
class RunConfig:
    link: LinkParams = field(default_factory=LinkParams)
    model: EmissionTimeModel = field(default_factory=EmissionTimeModel)
    window: WindowConfig = field(default_factory=lambda: WindowConfig(755.0, 850.0))
    settings: SettingsMap = field(default_factory=SettingsMap)
    convention: MeasurementConvention = field(default_factory=MeasurementConvention)
    seed: Optional[int] = None
    rounds: int = 3342
    ledger_out: Optional[str] = None
    penalty_c: Optional[float] = None


def parse_config_text(text: str) -> Dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ParseError(f"unknown config key {key!r}", line=lineno)
        raw[key] = value
    return raw


def load_config(path) -> Dict[str, str]:
    return parse_config_text(Path(path).read_text())


def _convert(key, value):
    if key in ("seed", "rounds", "bob_angle_sign"):
        return int(value)
    if key in ("alpha_deg", "beta_deg"):
        return tuple(float(v) for v in value.split(","))
    if key in ("bad_photon_kind", "ledger_out"):
        return value
    if key in ("per_arm_detection_prob_a", "per_arm_detection_prob_b") and value.lower() == "none":
        return None
    return float(value)


def build_run_config(raw: Dict[str, object], base: RunConfig = None) -> RunConfig:
    """Apply raw values (strings from a file, or already-typed CLI overrides)."""
    cfg = base or RunConfig()
    vals = {}
    for k, v in raw.items():
        if v is None:
            continue
        try:
            vals[k] = _convert(k, v) if isinstance(v, str) else v
        except ValueError:
            raise ParseError(f"bad value for {k}: {v!r}") from None
    link = replace(cfg.link, **{k: v for k, v in vals.items() if k in _LINK_KEYS})
    model = replace(cfg.model, **{k: v for k, v in vals.items() if k in _MODEL_KEYS})
    window = replace(cfg.window, **{k: v for k, v in vals.items() if k in _WINDOW_KEYS})
    conv = replace(cfg.convention, **{k: v for k, v in vals.items() if k in _CONV_KEYS})
    settings = replace(cfg.settings, **{k: v for k, v in vals.items() if k in ("alpha_deg", "beta_deg")})
    run = {k: v for k, v in vals.items() if k in ("seed", "rounds", "ledger_out", "penalty_c")}
    return replace(cfg, link=link, model=model, window=window, settings=settings, convention=conv, **run)
