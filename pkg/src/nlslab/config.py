"""Run configuration: plain ``key = value`` files, flags override file values."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .grid import Grid, Params


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    p: float = 1.0
    beta: float = 2.0
    L: float = 20.0
    N: int = 1024
    tol: float = 1e-10
    max_iter: int = 30
    gf_dt: float = 0.05
    gf_tol: float = 1e-9
    T: float = 10.0
    dt: float = 1e-3
    epsilon: float = 1e-2
    seed: int = 0
    record_every: int = 100
    K: float = 10.0
    k: int = 6
    samples: int = 200
    amplitude: float = 0.1
    resolution: int = 2000
    out: str = "nlslab_out"

    def validate(self) -> "RunConfig":
        try:
            Params(self.p, self.beta)
            Grid(self.L, self.N)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        positive = ["tol", "gf_dt", "gf_tol", "dt", "K", "amplitude"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("max_iter", "record_every", "k", "samples", "resolution"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.T < 0 or self.epsilon < 0:
            raise ConfigError("T and epsilon must be nonnegative")
        return self

    @property
    def params(self) -> Params:
        return Params(self.p, self.beta)

    def to_dict(self) -> dict:
        return asdict(self)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def _cast(key, value, where):
    kind = FIELD_TYPES[key]
    try:
        if kind == "int":
            v = float(value)
            if v != int(v):
                raise ValueError
            return int(v)
        return _CASTS[kind](value)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {key} = {value!r} as {kind}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: missing value for {key!r}")
        out[key] = _cast(key, value, f"{source}:{lineno}")
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then non-None ``overrides``."""
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read(), str(path)))
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _cast(key, v, "flag") if isinstance(v, str) else v
    return RunConfig(**values).validate()
