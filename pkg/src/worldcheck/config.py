"""JSON loaders for checker configurations, scenarios and policies.

Configuration object (also the body of a scenario)::

    {
      "backend": "swc" | "pewc" | "mwc" | "iopmp",
      "params":  {"slots": 4, "iids": 8, "space": ["0x0", "0x10000"]},
      "policy":  {...} or "policy.json",          # optional, compiled first
      "compile": {"style": "auto", "slots": 8},   # optional compiler options
      "hexdump": "image.hex",                     # optional register dump to restore
      "fields":  [{"index": 1, "field": "addr", "value": "0x401"}],
      "registers": [{"offset": "0x1008", "value": "0x30", "width": 8}]
    }

Scenario additions: ``name``, ``baseline`` (bool), ``beat_bytes`` (default 4),
``trace`` = [{cycle, iid, op, addr, len, data?}] and ``mmio`` =
[{cycle, offset, value, width}] for register writes during the run.
Integers may be given as decimal numbers or "0x" strings.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

from .compiler import Policy, compile_policy
from .core import AccessRequest, ConfigError, Kind, Op
from .regmap import RegisterImage, make_image, restore
from .sim import MmioWrite, Scenario, TraceItem

PathLike = Union[str, Path]


def _int(v, what: str) -> int:
    try:
        return int(v, 0) if isinstance(v, str) else int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected an integer, got {v!r}") from None


def read_json(path: PathLike) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_policy(src: Union[dict, PathLike], base: Optional[Path] = None) -> Policy:
    if isinstance(src, dict):
        return Policy.from_dict(src)
    path = Path(src)
    if base is not None and not path.is_absolute():
        path = base / path
    return Policy.from_dict(read_json(path))


def build_image(cfg: dict, base: Optional[Path] = None) -> RegisterImage:
    base = base or Path(".")
    if "hexdump" in cfg:
        src = cfg["hexdump"]
        text = src if "\n" in src else (base / src).read_text()
        image = restore(text)
    elif "policy" in cfg:
        if "backend" not in cfg:
            raise ConfigError("config: 'backend' is required")
        opts = dict(cfg.get("compile", {}))
        image = compile_policy(load_policy(cfg["policy"], base), cfg["backend"], **opts).image()
    else:
        if "backend" not in cfg:
            raise ConfigError("config: 'backend' is required")
        try:
            kind = Kind(cfg["backend"])
        except ValueError:
            raise ConfigError(f"config: unknown backend {cfg['backend']!r}") from None
        params = dict(cfg.get("params", {}))
        image = make_image(kind, **params)
    for n, f in enumerate(cfg.get("fields", [])):
        try:
            index = f.get("index", f.get("slot", f.get("entry", f.get("rrid"))))
            image.write_field(_int(index, f"fields[{n}].index"), f["field"],
                              _int(f["value"], f"fields[{n}].value"))
        except KeyError as e:
            raise ConfigError(f"fields[{n}]: missing or unknown {e}") from None
    for n, r in enumerate(cfg.get("registers", [])):
        try:
            image.write(_int(r["offset"], f"registers[{n}].offset"),
                        _int(r["value"], f"registers[{n}].value"), int(r.get("width", 4)))
        except KeyError as e:
            raise ConfigError(f"registers[{n}]: missing {e}") from None
    return image


def load_config(path: PathLike) -> RegisterImage:
    path = Path(path)
    return build_image(read_json(path), path.parent)


def _trace_item(n: int, t: dict) -> TraceItem:
    try:
        req = AccessRequest(_int(t["iid"], f"trace[{n}].iid"), Op.parse(str(t["op"])),
                            _int(t["addr"], f"trace[{n}].addr"), _int(t.get("len", 4), f"trace[{n}].len"))
    except KeyError as e:
        raise ConfigError(f"trace[{n}]: missing field {e}") from None
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"trace[{n}]: {e}") from None
    data = t.get("data")
    return TraceItem(_int(t.get("cycle", 0), f"trace[{n}].cycle"), req,
                     None if data is None else _int(data, f"trace[{n}].data"))


def scenario_from_dict(d: dict, base: Optional[Path] = None, name: str = "scenario") -> Scenario:
    baseline = bool(d.get("baseline", False))
    image = None if baseline and "backend" not in d else build_image(d, base)
    trace = [_trace_item(n, t) for n, t in enumerate(d.get("trace", []))]
    mmio = []
    for n, m in enumerate(d.get("mmio", [])):
        try:
            mmio.append(MmioWrite(_int(m["cycle"], f"mmio[{n}].cycle"),
                                  _int(m["offset"], f"mmio[{n}].offset"),
                                  _int(m["value"], f"mmio[{n}].value"), int(m.get("width", 4))))
        except KeyError as e:
            raise ConfigError(f"mmio[{n}]: missing field {e}") from None
    return Scenario(d.get("name", name), image, trace, baseline, mmio,
                    beat_bytes=int(d.get("beat_bytes", 4)),
                    single_beat=bool(d.get("single_beat", True)))


def load_scenario(path: PathLike) -> Scenario:
    path = Path(path)
    return scenario_from_dict(read_json(path), path.parent, path.stem)
