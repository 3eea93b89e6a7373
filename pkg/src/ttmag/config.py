"""Run configuration: schema, file parsing and overrides.

Two file formats are accepted. The text format holds one ``section.key = value``
per line, with ``#`` starting a comment; JSON may be nested
(``{"machine": {"omega_un": 0.5}}``) or use the same dotted keys. Every key
has a default, so an empty file (or none at all) describes the reference
machine: omega_k = 2.5, omega_un = 0.5, T_h = 5, T_c = 1, gamma = 1, mix
coupling with omega_I = a = 1, tau_U = 10 and tau_T = 20 thermalization times.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping

from .dynamics import InteractionSpec, Kind
from .errors import ConfigError, DomainError
from .machine import MachineConfig
from .metrology import ErrorBudget
from .protocol import Gaussian, MonteCarloConfig
from .qcore import QubitSpec

_OPT_FLOAT = "float?"

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "machine": {
        "omega_k": ("float", 2.5),
        "omega_un": ("float", 0.5),
        "t_h": ("float", 5.0),
        "t_c": ("float", 1.0),
        "gamma_k": ("float", 1.0),
        "gamma_un": ("float", 1.0),
        "kind": ("kind", "mix"),
        "omega_I": ("float", 1.0),
        "a": ("float", 1.0),
        "tau_U": (_OPT_FLOAT, 10.0),
        "tau_T": (_OPT_FLOAT, None),
        "dt": (_OPT_FLOAT, None),
    },
    "estimate": {
        "lo": ("float", 1.0),
        "hi": ("float", 4.0),
        "tol": ("float", 1e-8),
        "analytic": ("bool", False),
    },
    "budget": {
        "d_omega_prime": ("float", 0.0),
        "d_T_h": ("float", 0.0),
        "d_T_c": ("float", 0.0),
    },
    "mc": {
        "trials": ("int", 10_000),
        "seed": ("int?", None),
        "d_omega_prime": ("float", 0.1),
        "d_T_h": ("float", 0.0),
        "d_T_c": ("float", 0.0),
        "d_q": ("float", 0.0),
        "m_t": ("int", 1),
        "m_q": ("int", 1),
        "zero_method": ("method", "regression"),
    },
    "unimodality": {
        "omega_k_mu": ("float", 2.5),
        "omega_k_sigma": ("float", 0.05),
        "t_h_mu": ("float", 5.0),
        "t_h_sigma": ("float", 0.05),
        "t_c_mu": ("float", 1.0),
        "t_c_sigma": ("float", 0.02),
        "samples": ("int", 100_000),
        "bins": ("int", 60),
        "seed": ("int", 0),
        "strict": ("bool", True),
    },
}

_NONE_WORDS = {"none", "null", "auto", ""}
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def defaults() -> dict[str, dict[str, Any]]:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def _coerce(key: str, typ: str, raw: Any) -> Any:
    text = raw.strip() if isinstance(raw, str) else None
    if typ.endswith("?"):
        if raw is None or (text is not None and text.lower() in _NONE_WORDS):
            return None
        typ = typ[:-1]
    try:
        if typ == "float":
            if isinstance(raw, bool):
                raise ValueError
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if typ == "int":
            if isinstance(raw, bool):
                raise ValueError
            if isinstance(raw, float):
                if not raw.is_integer():
                    raise ValueError
                return int(raw)
            return int(raw, 0) if text is not None else int(raw)
        if typ == "bool":
            if isinstance(raw, bool):
                return raw
            if text is not None and text.lower() in _TRUE | _FALSE:
                return text.lower() in _TRUE
            raise ValueError
        if typ == "kind":
            return Kind(str(raw).strip().lower()).value
        if typ == "method":
            v = str(raw).strip().lower()
            if v not in ("regression", "threshold"):
                raise ValueError
            return v
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ}") from exc
    raise AssertionError(typ)


def _split(dotted: str) -> tuple[str, str]:
    sec, sep, key = dotted.strip().partition(".")
    if not sep or sec not in SCHEMA or key not in SCHEMA[sec]:
        raise ConfigError(f"unknown configuration key {dotted.strip()!r}")
    return sec, key


def apply(conf: dict[str, dict[str, Any]], dotted: str, raw: Any) -> None:
    sec, key = _split(dotted)
    conf[sec][key] = _coerce(dotted, SCHEMA[sec][key][0], raw)


def _flatten(obj: Mapping[str, Any], prefix: str = "") -> Iterable[tuple[str, Any]]:
    for k, v in obj.items():
        name = f"{prefix}.{k}" if prefix else str(k)
        if isinstance(v, Mapping):
            yield from _flatten(v, name)
        else:
            yield name, v


def parse_text(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        pairs.append((key.strip(), value.strip()))
    return pairs


def load(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict[str, dict[str, Any]]:
    """Resolved configuration: defaults, then the file, then ``key=value`` overrides."""
    conf = defaults()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {str(p)!r}: {exc.strerror or exc}") from exc
        if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{p}: top-level JSON value must be an object")
            pairs = list(_flatten(data))
        else:
            pairs = parse_text(text)
        for key, value in pairs:
            apply(conf, key, value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        apply(conf, key, value)
    return conf


def from_mapping(data: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """Validate an already-resolved configuration (as stored in a manifest)."""
    conf = defaults()
    for key, value in _flatten(data):
        apply(conf, key, value)
    return conf


def machine_config(conf: Mapping[str, Mapping[str, Any]]) -> MachineConfig:
    m = conf["machine"]
    try:
        return MachineConfig(
            spec_k=QubitSpec(m["omega_k"], m["t_h"], m["gamma_k"]),
            spec_u=QubitSpec(m["omega_un"], m["t_c"], m["gamma_un"]),
            inter=InteractionSpec(Kind(m["kind"]), omega_I=m["omega_I"], a=m["a"]),
            tau_U=m["tau_U"],
            tau_T=m["tau_T"],
            dt=m["dt"],
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def error_budget(conf: Mapping[str, Mapping[str, Any]]) -> ErrorBudget:
    b = conf["budget"]
    try:
        return ErrorBudget(d_T_h=b["d_T_h"], d_T_c=b["d_T_c"], d_omega_prime=b["d_omega_prime"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def monte_carlo_config(conf: Mapping[str, Mapping[str, Any]]) -> MonteCarloConfig:
    mc = conf["mc"]
    if mc["seed"] is None:
        raise ConfigError("Monte Carlo runs need a seed (mc.seed or --seed)")
    return MonteCarloConfig(**mc)


def unimodality_inputs(conf: Mapping[str, Mapping[str, Any]]) -> dict[str, Any]:
    u = conf["unimodality"]
    return dict(
        dist_omega_k=Gaussian(u["omega_k_mu"], u["omega_k_sigma"]),
        dist_T_h=Gaussian(u["t_h_mu"], u["t_h_sigma"]),
        dist_T_c=Gaussian(u["t_c_mu"], u["t_c_sigma"]),
        samples=u["samples"],
        bins=u["bins"],
        seed=u["seed"],
        strict=u["strict"],
    )
