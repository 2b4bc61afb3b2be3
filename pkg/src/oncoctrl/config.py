"""Flat key-value scenario config files, serialization, and hashing.

Grammar: one `key = value` pair per line, `#` starts a comment, blank lines
ignored. Keys are dotted (e.g. `ulm.k_x_p = 100`). Floats accept `a/b`
fraction syntax (`dt = 1/48`). Lists are comma-separated. The canonical
serialization (sorted keys, shortest round-trip floats) feeds the config
hash, so equal configs hash equally and every file round-trips exactly.
"""

from __future__ import annotations

import hashlib

from oncoctrl.engine import (
    CONTROLLER_MODES,
    ConstantProfile,
    DisturbanceProfile,
    PiecewiseConstantProfile,
    SampledSeriesProfile,
    ScenarioConfig,
    SinusoidProfile,
)
from oncoctrl.mfc import UltraLocalConfig
from oncoctrl.patient import PatientState


class ConfigError(ValueError):
    """Config text did not parse or validate."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _fmt_list(vals) -> str:
    return ",".join(_fmt(v) for v in vals)


def _profile_items(prefix: str, prof: DisturbanceProfile) -> list[tuple[str, str]]:
    items = [(f"{prefix}.kind", prof.kind)]
    if isinstance(prof, ConstantProfile):
        items.append((f"{prefix}.value", _fmt(prof.level)))
    elif isinstance(prof, PiecewiseConstantProfile):
        items.append((f"{prefix}.times", _fmt_list(prof.times)))
        items.append((f"{prefix}.levels", _fmt_list(prof.levels)))
    elif isinstance(prof, SinusoidProfile):
        items += [(f"{prefix}.mean", _fmt(prof.mean)),
                  (f"{prefix}.amplitude", _fmt(prof.amplitude)),
                  (f"{prefix}.period_days", _fmt(prof.period)),
                  (f"{prefix}.phase", _fmt(prof.phase)),
                  (f"{prefix}.clamp_lo", _fmt(prof.clamp_lo)),
                  (f"{prefix}.clamp_hi", _fmt(prof.clamp_hi))]
    elif isinstance(prof, SampledSeriesProfile):
        items.append((f"{prefix}.times", _fmt_list(prof.times)))
        items.append((f"{prefix}.values", _fmt_list(prof.values)))
    else:
        raise ConfigError(f"cannot serialize profile kind {prof.kind!r}")
    return items


def config_items(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    items: list[tuple[str, str]] = [
        ("params", cfg.params_preset),
        ("initial.x", _fmt(cfg.initial.x)),
        ("initial.y", _fmt(cfg.initial.y)),
        ("duration", _fmt(cfg.duration)),
        ("dt", _fmt(cfg.dt)),
        ("controller", cfg.controller_mode),
        ("reference.ramp_days", _fmt(cfg.ramp_time)),
    ]
    if cfg.goal is None:
        items.append(("reference.goal", "benign"))
    else:
        items.append(("reference.goal.x", _fmt(cfg.goal.x)))
        items.append(("reference.goal.y", _fmt(cfg.goal.y)))
    u = cfg.ulm
    items += [("ulm.alpha_x", _fmt(u.alpha_x)), ("ulm.alpha_y", _fmt(u.alpha_y)),
              ("ulm.k_x_p", _fmt(u.k_x_p)), ("ulm.k_y_p", _fmt(u.k_y_p)),
              ("ulm.tau_x", _fmt(u.tau_x)), ("ulm.tau_y", _fmt(u.tau_y)),
              ("ulm.quadrature", u.quadrature), ("ulm.signal", u.signal)]
    items += _profile_items("eta.x.true", cfg.eta_x_true)
    items += _profile_items("eta.y.true", cfg.eta_y_true)
    items.append(("eta.x.assumed",
                  "nominal" if cfg.eta_x_assumed is None else _fmt(cfg.eta_x_assumed)))
    items.append(("eta.y.assumed",
                  "nominal" if cfg.eta_y_assumed is None else _fmt(cfg.eta_y_assumed)))
    items.append(("force_zero_u", "true" if cfg.force_zero_u else "false"))
    items.append(("seed", str(cfg.seed)))
    return items


def serialize_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_items(cfg))


def canonical_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in sorted(config_items(cfg)))


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_config(cfg).encode("utf-8")).hexdigest()


def _parse_float(raw: str, key: str) -> float:
    raw = raw.strip()
    try:
        if "/" in raw:
            num, den = raw.split("/", 1)
            return float(num) / float(den)
        return float(raw)
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"{key}: not a number: {raw!r}") from err


def _parse_float_list(raw: str, key: str) -> tuple[float, ...]:
    parts = [p for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key}: empty list")
    return tuple(_parse_float(p, key) for p in parts)


def _pop_profile(kv: dict[str, str], prefix: str) -> DisturbanceProfile:
    kind = kv.pop(f"{prefix}.kind", "constant")
    try:
        if kind == "constant":
            return ConstantProfile(_parse_float(kv.pop(f"{prefix}.value", "0.5"),
                                                f"{prefix}.value"))
        if kind == "piecewise":
            return PiecewiseConstantProfile(
                times=_parse_float_list(kv.pop(f"{prefix}.times"), f"{prefix}.times"),
                levels=_parse_float_list(kv.pop(f"{prefix}.levels"), f"{prefix}.levels"))
        if kind == "sinusoid":
            return SinusoidProfile(
                mean=_parse_float(kv.pop(f"{prefix}.mean"), f"{prefix}.mean"),
                amplitude=_parse_float(kv.pop(f"{prefix}.amplitude"), f"{prefix}.amplitude"),
                period=_parse_float(kv.pop(f"{prefix}.period_days"), f"{prefix}.period_days"),
                phase=_parse_float(kv.pop(f"{prefix}.phase", "0"), f"{prefix}.phase"),
                clamp_lo=_parse_float(kv.pop(f"{prefix}.clamp_lo", "0"), f"{prefix}.clamp_lo"),
                clamp_hi=_parse_float(kv.pop(f"{prefix}.clamp_hi", "1"), f"{prefix}.clamp_hi"))
        if kind == "series":
            return SampledSeriesProfile(
                times=_parse_float_list(kv.pop(f"{prefix}.times"), f"{prefix}.times"),
                values=_parse_float_list(kv.pop(f"{prefix}.values"), f"{prefix}.values"))
    except KeyError as err:
        raise ConfigError(f"{prefix}: missing required key {err.args[0]!r}") from err
    except ValueError as err:
        raise ConfigError(f"{prefix}: {err}") from err
    raise ConfigError(f"{prefix}.kind: unknown profile kind {kind!r}")


def parse_config(text: str) -> ScenarioConfig:
    kv: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if not key or not val:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in kv:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = val

    goal = None
    if kv.pop("reference.goal", "benign") != "benign" and "reference.goal.x" not in kv:
        raise ConfigError("reference.goal must be 'benign' or given as goal.x/goal.y")
    if "reference.goal.x" in kv or "reference.goal.y" in kv:
        try:
            goal = PatientState(_parse_float(kv.pop("reference.goal.x"), "reference.goal.x"),
                                _parse_float(kv.pop("reference.goal.y"), "reference.goal.y"))
        except (KeyError, ValueError) as err:
            raise ConfigError(f"reference.goal: {err}") from err

    def popf(key: str, default: str) -> float:
        return _parse_float(kv.pop(key, default), key)

    eta_x_true = _pop_profile(kv, "eta.x.true")
    eta_y_true = _pop_profile(kv, "eta.y.true")

    def pop_assumed(key: str) -> float | None:
        raw = kv.pop(key, "nominal")
        return None if raw == "nominal" else _parse_float(raw, key)

    force_raw = kv.pop("force_zero_u", "false").lower()
    if force_raw not in ("true", "false"):
        raise ConfigError(f"force_zero_u must be true or false, got {force_raw!r}")

    try:
        ulm = UltraLocalConfig(
            alpha_x=popf("ulm.alpha_x", "-10000"),
            alpha_y=popf("ulm.alpha_y", "1"),
            k_x_p=popf("ulm.k_x_p", "100"),
            k_y_p=popf("ulm.k_y_p", "10"),
            tau_x=popf("ulm.tau_x", "20/48"),
            tau_y=popf("ulm.tau_y", "20/48"),
            quadrature=kv.pop("ulm.quadrature", "hold"),
            signal=kv.pop("ulm.signal", "error"),
        )
        cfg = ScenarioConfig(
            params_preset=kv.pop("params", "equilibria-calibrated"),
            initial=PatientState(popf("initial.x", "500"), popf("initial.y", "0.5")),
            duration=popf("duration", "60"),
            dt=popf("dt", "1/48"),
            controller_mode=kv.pop("controller", "closed-loop"),
            goal=goal,
            ramp_time=popf("reference.ramp_days", "5"),
            ulm=ulm,
            eta_x_true=eta_x_true,
            eta_y_true=eta_y_true,
            eta_x_assumed=pop_assumed("eta.x.assumed"),
            eta_y_assumed=pop_assumed("eta.y.assumed"),
            force_zero_u=force_raw == "true",
            seed=int(kv.pop("seed", "0")),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err

    if kv:
        raise ConfigError(f"unknown keys: {', '.join(sorted(kv))}")
    if cfg.controller_mode not in CONTROLLER_MODES:
        raise ConfigError(f"controller must be one of {CONTROLLER_MODES}")
    return cfg


def parse_config_file(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    return parse_config(text)
