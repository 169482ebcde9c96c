"""INI run configuration with a typed schema.

Every key has a type and a default; ``Config.to_text`` writes all of them, so a
serialized config is complete and ``parse(to_text(c)) == c``.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .params import ModelParams


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``section.key: message`` entries."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# converters: text -> value, value -> text


def _int(s):
    return int(str(s).strip(), 0)


def _float(s):
    return float(str(s).strip())


def _opt_float(s):
    s = str(s).strip()
    return None if s.lower() in ("auto", "none", "") else float(s)


def _exp(s):
    s = str(s).strip().lower()
    if s in ("inf", "infinity"):
        return math.inf
    v = float(s)
    if v < 1:
        raise ValueError("must be >= 1 or inf")
    return v


def _bool(s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return str(s).strip()


def _list(conv):
    def f(s):
        if isinstance(s, (list, tuple)):
            return tuple(conv(x) for x in s)
        s = str(s).strip()
        if s in ("", "none"):
            return None
        return tuple(conv(x) for x in s.replace(";", ",").split(",") if x.strip())
    return f


def _ladder(s):
    if isinstance(s, (list, tuple)):
        return tuple(tuple(int(x) for x in row) for row in s)
    return tuple(tuple(int(x) for x in row.split("/")) for row in str(s).split(",") if row.strip())


def _fraction(s):
    return Fraction(str(s).strip())


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join("/".join(str(x) for x in row) for row in v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_M = ModelParams()
SCHEMA = {
    "model": {
        "d": (_int, _M.d), "rho": (_int, _M.rho), "alpha": (_float, _M.alpha), "s": (_opt_float, None),
        "M": (_int, _M.M), "delta": (_float, _M.delta), "dt": (_float, _M.dt),
        "mean_normalized": (_bool, _M.mean_normalized),
    },
    "solver": {"tol": (_float, 1e-8), "max_iter": (_int, 25), "max_halvings": (_int, 8)},
    "run": {"seed": (_int, 0), "seeds": (_int, 1), "zero": (_bool, False), "threads": (_int, 1)},
    "count": {
        "kind": (_str, "sphere"), "d": (_int, 3), "A": (_int, None), "R": (_float, None), "r": (_float, None),
        "normal": (_list(_fraction), None), "offset": (_fraction, Fraction(0)), "n2": (_list(_int), None),
        "mu": (_int, None), "N1": (_int, None), "N2": (_int, None), "N3": (_int, None),
        "n": (_list(_int), None), "m": (_int, None), "pattern": (_str, "conj1"), "strategy": (_str, "auto"),
        "budget": (_int, 1 << 27), "corpus": (_bool, False), "A_max": (_int, 2000),
    },
    "norm": {
        "kinds": (_list(_str), ("Hs", "LpLq", "XsProxy", "Xsb", "Zs", "ZsPrime")), "s": (_opt_float, None),
        "b": (_float, 0.5), "p": (_exp, 4.0), "q": (_exp, 4.0), "window": (_str, "taper"),
        "source": (_str, "free"),
    },
    "probe": {
        "samples": (_int, None), "seed_start": (_int, 0), "deltas": (_list(_float), (0.5, 0.25, 0.1, 0.05)),
        "eps": (_float, 0.5), "levels": (_list(_float), None), "coefficients": (_list(_float), (1.0,)),
        "moments": (_list(_int), (2, 4, 8)), "p": (_float, 4.0), "q": (_float, 4.0),
        "Ns": (_list(_int), (2, 4, 8, 16, 32)), "time_nodes": (_int, 4), "d": (_int, 3), "trials": (_int, 50),
        "rad_step": (_float, 0.2), "case": (_str, "Ba"), "ladder": (_ladder, ((4, 4, 2, 1), (8, 8, 4, 2), (16, 16, 8, 4))),
        "steps": (_int, 64), "delta_window": (_float, 0.01), "slack": (_float, None),
        "triples": (_ladder, ((1, 2, 3),)),
    },
}


@dataclass
class Config:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, kv in self.values.items():
            full.setdefault(sec, {}).update(kv)
        self.values = full

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set(self, section: str, key: str, raw: str):
        """Set one key from its text form; raises ConfigError on a bad value."""
        conv = _converter(section, key)
        try:
            self.values[section][key] = _convert(conv, raw, SCHEMA[section][key][1])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError([f"{section}.{key}: {exc}"]) from None

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    def model_params(self) -> ModelParams:
        m = self.values["model"]
        try:
            return ModelParams(**m)
        except (ValueError, TypeError) as exc:
            raise ConfigError([f"model: {exc}"]) from None

    def to_text(self) -> str:
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                lines.append(f"{key} = {_fmt(self.values[sec][key])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Config) and self.to_text() == other.to_text()


def _converter(section, key):
    try:
        return SCHEMA[section][key][0]
    except KeyError:
        raise ConfigError([f"{section}.{key}: unknown key"]) from None


def _convert(conv, raw: str, default):
    if default is None and str(raw).strip().lower() in ("auto", "none", ""):
        return None
    return conv(raw)


def parse(text: str) -> Config:
    """Parse INI text against the schema, collecting every problem before failing."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    problems, values = [], {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            problems.append(f"{sec}: unknown section")
            continue
        values[sec] = {}
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                problems.append(f"{sec}.{key}: unknown key")
                continue
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = _convert(conv, raw, SCHEMA[sec][key][1])
            except (ValueError, ZeroDivisionError) as exc:
                problems.append(f"{sec}.{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    cfg = Config(values)
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    problems = []
    try:
        cfg.model_params()
    except ConfigError as exc:
        problems.extend(exc.problems)
    s = cfg.values
    if s["solver"]["tol"] <= 0:
        problems.append("solver.tol: must be positive")
    if s["solver"]["max_iter"] < 1:
        problems.append("solver.max_iter: must be >= 1")
    if s["run"]["seeds"] < 1:
        problems.append("run.seeds: must be >= 1")
    if not 0 <= s["run"]["seed"] < 2 ** 64:
        problems.append("run.seed: must be an unsigned 64-bit integer")
    if s["run"]["threads"] == 0 or s["run"]["threads"] < -1:
        problems.append("run.threads: must be positive or -1")
    if s["norm"]["window"] not in ("taper", "zero"):
        problems.append("norm.window: must be taper or zero")
    if s["norm"]["source"] not in ("free", "solution"):
        problems.append("norm.source: must be free or solution")
    if s["count"]["pattern"] not in ("conj1", "conj2"):
        problems.append("count.pattern: must be conj1 or conj2")
    if problems:
        raise ConfigError(problems)


def load(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
