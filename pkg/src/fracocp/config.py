"""INI run configuration.

Keys form one flat namespace; sections only group them for readability, so
``s = 0.2`` may appear under ``[problem]`` or any other section. Unknown or
repeated keys are rejected. ``inf`` is accepted for ``C_Tr``.
"""
import configparser
import dataclasses
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .afem import AfemConfig

SECTIONS = {
    "problem": ("domain", "s", "mu", "a", "b", "u_d"),
    "afem": ("theta", "max_cycles", "max_cells", "marking", "initial_refine", "C_Tr",
             "gamma_offset", "enrich"),
    "solver": ("optimizer", "opt_tol", "opt_max_iter", "solver_tol", "preconditioner"),
    "output": ("output_dir", "export_vtk", "seed"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` is anchored at ``file:line`` when known."""


@dataclass
class RunConfig(AfemConfig):
    output_dir: str = "run"
    export_vtk: bool = True
    seed: int = 0

    def validate(self):
        super().validate()
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def afem_config(self):
        names = {f.name for f in dataclasses.fields(AfemConfig)}
        return AfemConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
assert set(_FIELDS) == {k for keys in SECTIONS.values() for k in keys}


def _convert(name, raw):
    kind = _FIELDS[name].type
    kind = kind if isinstance(kind, str) else kind.__name__
    text = raw.strip()
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "int":
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind == "float":
        value = float(text)
        if math.isnan(value):
            raise ValueError("NaN is not allowed")
        return value
    return text


def _line_of(text, key, occurrence=1):
    for no, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            occurrence -= 1
            if occurrence == 0:
                return no
    return None


def _blamed_key(message, values):
    """The given key mentioned earliest in a validation message."""
    hits = [(m.start(), k) for k in values
            if (m := re.search(rf"(?<![\w.]){re.escape(k)}(?!\w)", message))]
    return min(hits)[1] if hits else ""


def parse_config(text, source="<config>", base_dir=None):
    """Build a :class:`RunConfig` from INI text.

    A relative ``output_dir`` is resolved against ``base_dir`` when given.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            where = f"{source}:{_line_of(text, key, 2 if key in values else 1) or '?'}"
            if key not in _FIELDS:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            if key in values:
                raise ConfigError(f"{where}: key {key!r} given twice")
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {key}: {exc}") from None
    if base_dir is not None and "output_dir" in values:
        out = Path(values["output_dir"])
        if not out.is_absolute():
            values["output_dir"] = str(Path(base_dir) / out)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        line = _line_of(text, _blamed_key(str(exc), values)) if values else None
        raise ConfigError(f"{source}:{line or '?'}: {exc}") from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path), base_dir=path.parent)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)          # shortest text that round-trips
    return str(value)


def dump_config(config):
    """INI text that :func:`parse_config` maps back to an equal config."""
    data = dataclasses.asdict(config)
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out += [f"{k} = {_format(data[k])}" for k in keys]
        out.append("")
    return "\n".join(out)
