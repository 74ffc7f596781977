"""Reading and writing PNSGD configurations.

Configurations are JSON or YAML mappings. Nested sections and dotted keys are
interchangeable, so ``{"noise": {"family": "gaussian"}}`` and
``{"noise.family": "gaussian"}`` mean the same thing. Schema::

    eta:           learning rate
    n:             number of records
    noise.family:  "gaussian" | "laplace"
    noise.scale:   sigma (Gaussian) or v (Laplace)
    noise.dim:     dimension d (Gaussian only, default 1)
    domain.kind:   "interval" | "ball"
    domain.params: [a, b] for an interval, [diameter] or [diameter, d] for a ball
                   (mappings {a, b} / {diameter, dim} are also accepted)
    reg.L, reg.beta, reg.rho: loss regularity (rho defaults to 0)

An optional ``loss`` section (``kind: quadratic``, ``c``, ``data_domain``)
describes the loss used by density propagation and simulation.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Mapping

import yaml

from egamma_dp.accountant import PnsgdConfig
from egamma_dp.errors import ConfigError
from egamma_dp.kernels import Ball, GaussianNoise, Interval, LaplaceNoise, LossRegularity


def expand_dotted(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Turns ``{"a.b": 1}`` into ``{"a": {"b": 1}}``, merging with nested input."""
    out: Dict[str, Any] = {}
    for key, value in flat.items():
        if isinstance(value, Mapping):
            value = expand_dotted(value)
        node = out
        parts = str(key).split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"key {key!r} conflicts with a scalar entry"])
        leaf = parts[-1]
        if isinstance(value, dict) and isinstance(node.get(leaf), dict):
            node[leaf].update(value)
        else:
            node[leaf] = value
    return out


def read_mapping(path) -> Dict[str, Any]:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if not isinstance(data, Mapping):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return expand_dotted(data)


def _number(section: Mapping, key: str, problems: List[str], prefix: str, default=None):
    if key not in section:
        if default is not None:
            return default
        problems.append(f"missing {prefix}{key}")
        return None
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{prefix}{key} must be a number (got {value!r})")
        return None
    return value


def _build(factory, problems: List[str], *args):
    try:
        return factory(*args)
    except ValueError as exc:
        problems.append(str(exc))
        return None


def config_from_mapping(data: Mapping[str, Any]) -> PnsgdConfig:
    """Builds a validated :class:`PnsgdConfig`; lists every violated invariant."""
    data = expand_dotted(data)
    problems: List[str] = []
    eta = _number(data, "eta", problems, "")
    n = _number(data, "n", problems, "")

    noise_sec = data.get("noise", {})
    family = str(noise_sec.get("family", "")).lower()
    scale = _number(noise_sec, "scale", problems, "noise.")
    dim = _number(noise_sec, "dim", problems, "noise.", default=1)
    noise = None
    if family == "gaussian":
        if scale is not None:
            noise = _build(GaussianNoise, problems, scale, dim)
    elif family == "laplace":
        if dim != 1:
            problems.append(f"Laplace noise is one-dimensional (noise.dim={dim!r})")
        elif scale is not None:
            noise = _build(LaplaceNoise, problems, scale)
    else:
        problems.append(f"noise.family must be 'gaussian' or 'laplace' (got {family!r})")

    dom = data.get("domain", {})
    kind = str(dom.get("kind", "")).lower()
    params = dom.get("params")
    geom = None
    if kind == "interval":
        if isinstance(params, Mapping):
            params = [params.get("a"), params.get("b")]
        if not isinstance(params, (list, tuple)) or len(params) != 2:
            problems.append(f"domain.params for an interval must be [a, b] (got {params!r})")
        else:
            geom = _build(Interval, problems, float(params[0]), float(params[1]))
    elif kind == "ball":
        if isinstance(params, Mapping):
            params = [params.get("diameter"), params.get("dim", 1)]
        if isinstance(params, (int, float)):
            params = [params]
        if not isinstance(params, (list, tuple)) or not 1 <= len(params) <= 2:
            problems.append(f"domain.params for a ball must be [diameter] or [diameter, d] "
                            f"(got {params!r})")
        else:
            d = int(params[1]) if len(params) == 2 else int(dim)
            geom = _build(Ball, problems, float(params[0]), d)
    else:
        problems.append(f"domain.kind must be 'interval' or 'ball' (got {kind!r})")

    reg_sec = data.get("reg", {})
    L = _number(reg_sec, "L", problems, "reg.")
    beta = _number(reg_sec, "beta", problems, "reg.")
    rho = _number(reg_sec, "rho", problems, "reg.", default=0.0)
    reg = None
    if L is not None and beta is not None and rho is not None:
        reg = _build(LossRegularity, problems, L, beta, rho)

    # Scalar and cross-field checks repeated here so that a broken file reports
    # them together with the section errors above.
    if eta is not None and not eta > 0:
        problems.append(f"eta must be > 0 (got {eta!r})")
    elif eta is not None and reg is not None and not eta < 2.0 / (reg.beta + reg.rho):
        problems.append(f"eta={eta!r} violates the smoothness condition "
                        f"eta < 2/(beta+rho) = {2.0 / (reg.beta + reg.rho)!r}")
    if n is not None and (int(n) != n or n < 1):
        problems.append(f"n must be a positive integer (got {n!r})")
    if family == "laplace" and kind == "ball":
        problems.append("Laplace noise is only analysed on an interval domain (d = 1)")

    if problems or None in (eta, n, noise, geom, reg):
        raise ConfigError(problems or ["incomplete configuration"])
    try:
        return PnsgdConfig(eta=float(eta), noise=noise, geom=geom, n=n, reg=reg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc


def config_to_mapping(cfg: PnsgdConfig) -> Dict[str, Any]:
    """The nested mapping that :func:`config_from_mapping` reads back to ``cfg``."""
    if cfg.family == "gaussian":
        noise = {"family": "gaussian", "scale": cfg.noise.sigma, "dim": cfg.noise.d}
    else:
        noise = {"family": "laplace", "scale": cfg.noise.v, "dim": 1}
    if isinstance(cfg.geom, Interval):
        domain = {"kind": "interval", "params": [cfg.geom.a, cfg.geom.b]}
    else:
        domain = {"kind": "ball", "params": [cfg.geom.diameter, cfg.geom.d]}
    return {
        "eta": cfg.eta,
        "n": cfg.n,
        "noise": noise,
        "domain": domain,
        "reg": {"L": cfg.reg.L, "beta": cfg.reg.beta, "rho": cfg.reg.rho},
    }


def load_config(path) -> PnsgdConfig:
    return config_from_mapping(read_mapping(path))
