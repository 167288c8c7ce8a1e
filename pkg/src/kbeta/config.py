"""Experiment configuration: an INI file with ``[experiment]`` and ``[parameters]``.

Grammar (``configparser`` syntax, ``#`` or ``;`` at line start for comments)::

    [experiment]
    name = quantize-sweep          # one of EXPERIMENTS
    output = results/bump          # optional; --output overrides

    [parameters]
    betas = 8, 32, 128, 512        # comma-separated positive reals
    potential = seed-bump          # see POTENTIAL_KINDS
    ...

Values that contain ``=`` (ray and snc specs) are fine: only the first ``=``
on a line separates key from value.  Every parameter has a default listed in
``DEFAULTS``; keys that no experiment reads are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigInvalid, NonConvex

EXPERIMENTS = (
    "quantize-sweep",
    "functional-report",
    "ray-slope",
    "l-beta-compare",
    "stability-scan",
    "snc-eval",
    "invariant-suite",
)

DEFAULTS: dict[str, str] = {
    "n_points": "2001",
    "half_width": "40",
    "betas": "8, 32, 128, 512",
    "beta": "8",
    "potential": "seed-bump",
    "potentials": "zero, seed-bump",
    "ray": "dnc",
    "rays": "dnc, abs, three",
    "u_ray": "dnc",
    "v_ray": "trivial",
    "functionals": "I, J, Ent, K, K_beta",
    "t_max": "50",
    "n_samples": "9",
    "spacing": "0.04",
    "tail_model": "linear",
    "gamma": "0.05",
    "snc": "a = [1,1]; b = [0, 1/2]; c = [0,0]; d = [0,1]",
    "seed": "0",
    "n_harmonic": "12",
    "n_profile": "12",
    "tolerance": "0.05",
    "residual_bound": "0.05",
}

# parameters each experiment reads (beyond the grid keys)
EXPERIMENT_KEYS: dict[str, set[str]] = {
    "quantize-sweep": {"n_points", "half_width", "betas", "potential"},
    "functional-report": {"n_points", "half_width", "beta", "potentials"},
    "ray-slope": {"ray", "functionals", "betas", "t_max", "n_samples", "spacing", "tail_model", "residual_bound"},
    "l-beta-compare": {"u_ray", "v_ray", "betas", "t_max", "n_samples", "spacing", "snc", "tolerance", "tail_model", "residual_bound"},
    "stability-scan": {"rays", "beta", "gamma", "t_max", "n_samples", "spacing", "tail_model", "residual_bound"},
    "snc-eval": {"snc", "betas"},
    "invariant-suite": {"n_points", "half_width", "betas", "seed", "n_harmonic", "n_profile"},
}

PRESET_RAYS = {
    "trivial": "slopes = [0]",
    "dnc": "breakpoints = [1/2]; slopes = [0, 1]",
    "abs": "breakpoints = [1/2]; slopes = [-1, 1]; offset = 1/2",
    "three": "breakpoints = [1/4, 3/4]; slopes = [0, 1, 2]",
    "product": "slopes = [1]",
}

POTENTIAL_KINDS = ("zero", "seed-bump", "constant:<c>", "harmonic:<a>:<b>", "file:<path>")


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict[str, str]
    output_dir: Path | None = None
    source: Path | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, key: str) -> str:
        return self.parameters.get(key, DEFAULTS[key])

    # typed accessors, each naming the offending key on failure
    def get_int(self, key: str, minimum: int | None = None) -> int:
        raw = self.get(key)
        try:
            val = int(raw)
        except ValueError:
            raise ConfigInvalid(f"{key}: expected an integer, got '{raw}'") from None
        if minimum is not None and val < minimum:
            raise ConfigInvalid(f"{key}: must be >= {minimum}, got {val}")
        return val

    def get_float(self, key: str, positive: bool = False, minimum: float | None = None) -> float:
        raw = self.get(key)
        try:
            val = float(Fraction(raw))
        except (ValueError, ZeroDivisionError):
            raise ConfigInvalid(f"{key}: expected a number, got '{raw}'") from None
        if positive and not val > 0:
            raise ConfigInvalid(f"{key}: must be positive, got {raw}")
        if minimum is not None and val < minimum:
            raise ConfigInvalid(f"{key}: must be >= {minimum}, got {raw}")
        return val

    def get_list(self, key: str) -> list[str]:
        return split_top_level(self.get(key))

    def get_betas(self, key: str = "betas") -> list[Fraction]:
        out = []
        for tok in self.get_list(key) if key == "betas" else [self.get(key)]:
            try:
                b = Fraction(tok)
            except (ValueError, ZeroDivisionError):
                raise ConfigInvalid(f"{key}: '{tok}' is not a number") from None
            if b <= 0:
                raise ConfigInvalid(f"{key}: beta must be positive, got {tok}")
            out.append(b)
        if not out:
            raise ConfigInvalid(f"{key}: empty list")
        return out

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside square brackets."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    if not parser.has_section("experiment"):
        raise ConfigInvalid(f"{path}: missing [experiment] section")
    exp = dict(parser.items("experiment"))
    if "name" not in exp:
        raise ConfigInvalid(f"{path}: [experiment] needs a 'name'")
    unknown_sections = set(parser.sections()) - {"experiment", "parameters"}
    if unknown_sections:
        raise ConfigInvalid(f"{path}: unknown sections {sorted(unknown_sections)}")
    params = dict(parser.items("parameters")) if parser.has_section("parameters") else {}
    out = exp.get("output")
    cfg = ExperimentConfig(exp["name"].strip(), params, None, path, path.parent.resolve())
    if out:
        cfg.output_dir = cfg.resolve(out)
    return cfg


def validate(cfg: ExperimentConfig) -> list[str]:
    """Schema and range checks without numerics; returns notes, raises on errors."""
    from .divisorial import SncModelData
    from .errors import EmptyData

    if cfg.experiment not in EXPERIMENTS:
        raise ConfigInvalid(f"name: unknown experiment '{cfg.experiment}'; expected one of {', '.join(EXPERIMENTS)}")
    allowed = EXPERIMENT_KEYS[cfg.experiment]
    extra = set(cfg.parameters) - allowed
    if extra:
        raise ConfigInvalid(f"{sorted(extra)[0]}: not a parameter of {cfg.experiment}")
    notes = []
    if "n_points" in allowed:
        cfg.get_int("n_points", minimum=3)
        cfg.get_float("half_width", positive=True)
    if "betas" in allowed:
        cfg.get_betas("betas")
    if "beta" in allowed:
        cfg.get_betas("beta")
    if "t_max" in allowed:
        cfg.get_float("t_max", minimum=10.0)
        cfg.get_int("n_samples", minimum=4)
        cfg.get_float("spacing", positive=True)
    if "tail_model" in allowed and cfg.get("tail_model") not in ("linear", "inverse"):
        raise ConfigInvalid(f"tail_model: expected 'linear' or 'inverse', got '{cfg.get('tail_model')}'")
    if "residual_bound" in allowed:
        cfg.get_float("residual_bound", positive=True)
    if "gamma" in allowed:
        cfg.get_float("gamma", positive=True)
    if "tolerance" in allowed:
        cfg.get_float("tolerance", positive=True)
    if "seed" in allowed:
        cfg.get_int("seed")
        cfg.get_int("n_harmonic", minimum=0)
        cfg.get_int("n_profile", minimum=0)
    for key in ("potential", "potentials"):
        if key in allowed:
            specs = [cfg.get(key)] if key == "potential" else cfg.get_list(key)
            for spec in specs:
                check_potential_spec(cfg, key, spec)
    for key in ("ray", "u_ray", "v_ray", "rays"):
        if key in allowed:
            specs = cfg.get_list(key) if key == "rays" else [cfg.get(key)]
            for spec in specs:
                parse_ray_spec(cfg, key, spec)
    if "snc" in allowed:
        try:
            SncModelData.parse(cfg.get("snc"))
        except (ValueError, EmptyData) as exc:
            raise ConfigInvalid(f"snc: {exc}") from None
    if "functionals" in allowed:
        from .rays import FUNCTIONAL_NAMES

        for name in cfg.get_list("functionals"):
            if name not in FUNCTIONAL_NAMES:
                raise ConfigInvalid(f"functionals: unknown functional '{name}'")
    notes.append(f"{cfg.experiment}: valid")
    return notes


def check_potential_spec(cfg: ExperimentConfig, key: str, spec: str) -> None:
    kind, _, rest = spec.partition(":")
    if kind in ("zero", "seed-bump") and not rest:
        return
    if kind == "constant":
        try:
            float(rest)
        except ValueError:
            raise ConfigInvalid(f"{key}: bad constant in '{spec}'") from None
        return
    if kind == "harmonic":
        parts = rest.split(":")
        try:
            if len(parts) != 2:
                raise ValueError
            [float(p) for p in parts]
        except ValueError:
            raise ConfigInvalid(f"{key}: expected harmonic:<a>:<b>, got '{spec}'") from None
        return
    if kind == "file":
        path = cfg.resolve(rest)
        if not path.is_file():
            raise ConfigInvalid(f"{key}: potential file not found: {path}")
        return
    raise ConfigInvalid(f"{key}: unknown potential '{spec}'; expected one of {', '.join(POTENTIAL_KINDS)}")


def parse_ray_spec(cfg: ExperimentConfig, key: str, spec: str):
    """Preset name, ``file:<path>`` holding a spec, or an inline spec (``|`` may stand for ``;``)."""
    from .rays import ToricTestConfig

    if spec in PRESET_RAYS:
        text = PRESET_RAYS[spec]
    elif spec.startswith("file:"):
        path = cfg.resolve(spec[5:])
        if not path.is_file():
            raise ConfigInvalid(f"{key}: ray file not found: {path}")
        text = path.read_text()
    else:
        text = spec.replace("|", ";")
    try:
        return ToricTestConfig.parse(text)
    except (ValueError, NonConvex) as exc:
        raise ConfigInvalid(f"{key}: {exc}") from None


__all__ = [
    "DEFAULTS",
    "EXPERIMENTS",
    "EXPERIMENT_KEYS",
    "ExperimentConfig",
    "PRESET_RAYS",
    "load_config",
    "parse_ray_spec",
    "validate",
]
