"""INI-style run configuration.

Every tunable has a named key carrying its published default; config files
only list overrides. Two scale presets exist: ``desk`` (the CI-sized
geometry) and ``paper`` (full-size acquisition, accepted but far slower).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .phantom import LesionSlot, PhantomSpec, default_slots

ALGORITHMS = ("fista", "mfista", "oista", "fpgm", "mfpgm", "supart")
MODELS = ("transmission_nonneg", "ls_tv")


@dataclass(frozen=True)
class GeometrySection:
    views: int = 90
    rays: int = 128
    grid: int = 128
    extent: float = 9.1


@dataclass(frozen=True)
class PhantomSection:
    skull_outer: float = 8.0
    skull_inner: float = 7.2
    skull_mu: float = 0.416
    background_mu: float = 0.21
    inhomogeneity: float = 0.002
    inhomogeneity_order: int = 4
    force_side: str = "random"
    slots: tuple[LesionSlot, ...] = field(default_factory=default_slots)


@dataclass(frozen=True)
class CountsSection:
    flat: float = 1e5
    dark: float = 10.0
    noiseless: bool = False
    seed: int = 1234


@dataclass(frozen=True)
class SolverSection:
    algorithm: str = "fpgm"
    model: str = "transmission_nonneg"
    N: int = 100
    L0: float = 1.0
    beta: float = 2.0
    t1: float = 1.0
    K: float = 10.0
    eta_bar: float = math.inf
    lam: float = 5e-3
    tv_inner_iters: int = 10
    tv_warm_start: bool = True
    skip_delta_c: bool = False
    # Row-action settings, used when algorithm == supart.
    art_alpha: float = 0.05
    sup_a: float = 1.0 - 1e-4
    sup_b: float = 3e-2
    sup_I: int = 10
    epsilon: float = math.nan  # nan = calibrate from the solver residual


# Benchmark legs accept the solver variants plus "fpgm_inf", the free-running
# configuration with K = eta_bar = inf that has no convergence guarantee.
BENCHMARK_ALGORITHMS = ("fista", "mfista", "oista", "fpgm", "mfpgm", "fpgm_inf")


@dataclass(frozen=True)
class BenchmarkSection:
    algorithms: tuple[str, ...] = ("fista", "fpgm", "fpgm_inf")
    L0_values: tuple[float, ...] = (3e2, 3e3, 3e4)
    budget: int = 500
    reference_multiplier: int = 2
    reference_L0: float = 3e3


@dataclass(frozen=True)
class StudySection:
    seeds: int = 30
    base_seed: int = 1000
    lambdas: tuple[float, ...] = (4e-3, 5e-3, 6e-3)
    calibration_lambda: float = 5e-3
    budget: int = 100
    L0: float = 1.0
    epsilon: float = math.nan  # nan = calibrate per seed; paper scale: 2.33


@dataclass(frozen=True)
class RunConfig:
    scale: str = "desk"
    geometry: GeometrySection = field(default_factory=GeometrySection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    counts: CountsSection = field(default_factory=CountsSection)
    solver: SolverSection = field(default_factory=SolverSection)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    study: StudySection = field(default_factory=StudySection)

    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(
            n_side=self.geometry.grid,
            extent=self.geometry.extent,
            skull_outer=self.phantom.skull_outer,
            skull_inner=self.phantom.skull_inner,
            skull_mu=self.phantom.skull_mu,
            background_mu=self.phantom.background_mu,
            slots=self.phantom.slots,
            inhomogeneity_amplitude=self.phantom.inhomogeneity,
            inhomogeneity_order=self.phantom.inhomogeneity_order,
            force_side=self.phantom.force_side,
        )


def _paper_scale(cfg: RunConfig) -> RunConfig:
    geometry = replace(cfg.geometry, views=512, rays=2048, grid=2048)
    study = replace(cfg.study, epsilon=2.33)
    return replace(cfg, scale="paper", geometry=geometry, study=study)


def _parse_value(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)  # accepts inf/nan spellings
    if kind is str:
        return text
    raise ValueError(f"unsupported kind {kind!r}")


def _parse_tuple(kind, text: str):
    items = [s for s in (p.strip() for p in text.split(",")) if s]
    return tuple(_parse_value(kind, s) for s in items)


def _parse_slots(text: str) -> tuple[LesionSlot, ...]:
    if text.strip() == "default":
        return default_slots()
    slots = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [float(p) for p in chunk.split(",")]
        if len(parts) != 4:
            raise ValueError("each slot needs cx,cy,radius,delta")
        slots.append(LesionSlot(*parts))
    if not slots:
        raise ValueError("empty slot list")
    return tuple(slots)


_TUPLE_KINDS = {
    ("benchmark", "algorithms"): str,
    ("benchmark", "L0_values"): float,
    ("study", "lambdas"): float,
}

_K_SECTION_FIELDS = {
    "geometry": GeometrySection,
    "phantom": PhantomSection,
    "counts": CountsSection,
    "solver": SolverSection,
    "benchmark": BenchmarkSection,
    "study": StudySection,
}


def _apply_section(cfg_section, section_name: str, items) -> object:
    valid = {f.name: f for f in fields(cfg_section)}
    updates = {}
    for key, raw in items:
        key = key.strip()
        if section_name == "phantom" and key == "slots":
            try:
                updates[key] = _parse_slots(raw)
            except ValueError as exc:
                raise ConfigError(f"[phantom] slots: {exc}") from exc
            continue
        if key not in valid:
            raise ConfigError(f"unknown key {key!r} in section [{section_name}]")
        kind = (section_name, key)
        try:
            if kind in _TUPLE_KINDS:
                updates[key] = _parse_tuple(_TUPLE_KINDS[kind], raw)
            else:
                # Parse type follows the default value's type.
                updates[key] = _parse_value(type(getattr(cfg_section, key)), raw)
        except ValueError as exc:
            raise ConfigError(
                f"bad value for {key!r} in section [{section_name}]: {exc}"
            ) from exc
    return replace(cfg_section, **updates)


def default_config(scale: str = "desk") -> RunConfig:
    cfg = RunConfig()
    if scale == "paper":
        cfg = _paper_scale(cfg)
    elif scale != "desk":
        raise ConfigError(f"unknown scale {scale!r}")
    return cfg


def load_config(path: str | None, scale: str = "desk") -> RunConfig:
    """Defaults for ``scale`` overridden by the INI file at ``path``."""
    cfg = default_config(scale)
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    updates = {}
    for section in parser.sections():
        if section not in _K_SECTION_FIELDS:
            raise ConfigError(f"unknown section [{section}] in {path}")
        current = getattr(cfg, section)
        updates[section] = _apply_section(current, section,
                                          parser.items(section))
    cfg = replace(cfg, **updates)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    g = cfg.geometry
    if g.views < 2 or g.rays < 2:
        raise ConfigError("geometry needs views >= 2 and rays >= 2")
    if g.grid < 4:
        raise ConfigError("grid side must be at least 4")
    if cfg.solver.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.solver.algorithm!r}")
    if cfg.solver.model not in MODELS:
        raise ConfigError(f"unknown model {cfg.solver.model!r}")
    if cfg.solver.algorithm == "supart" and cfg.solver.model != "ls_tv":
        raise ConfigError("supart needs the ls_tv model (row-action data)")
    for name in cfg.benchmark.algorithms:
        if name not in BENCHMARK_ALGORITHMS:
            raise ConfigError(f"benchmark cannot run algorithm {name!r}")
    if cfg.counts.dark < 0 or cfg.counts.flat <= cfg.counts.dark:
        raise ConfigError("counts must satisfy flat > dark >= 0")
