"""Plain-text ``key=value`` experiment configuration.

One pair per line, ``#`` starts a comment.  Every error is collected and
reported together, not just the first one.
"""

import dataclasses
from dataclasses import dataclass

from regnoise.spectral import SpectralOperator

DRIFT_FAMILIES = ("zero", "constant", "lipschitz", "sign", "piecewise-random", "linear-test")


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class ExperimentConfig:
    eigenvalues: tuple | None = None  # explicit list; overrides alpha
    alpha: float = 2.0  # power law lam_n = n^alpha
    D: int = 8
    gamma: float = 7.0
    drift: str = "sign"
    amplitude: float = 1.0
    threshold: float = 0.0
    threshold_slope: float = 0.0
    drift_seed: int = 0
    grid_steps: int = 1024
    horizon: float = 1.0
    replicas: int = 200
    seed: int = 0
    out: str = "-"
    tolerance: float = 1e-9
    max_iter: int = 200
    damping: float = 1.0
    quadrature_min: int = 16
    beta_A: float = 1.0
    budget: int = 10**7
    workers: int = 1

    def operator(self):
        if self.eigenvalues is not None:
            return SpectralOperator(self.eigenvalues)
        return SpectralOperator.power_law(self.D, self.alpha)

    def echo(self):
        """``key=value`` lines for every field, in declaration order."""
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out.append(f"{f.name}={v}")
        return out


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name, text):
    kind = FIELDS[name].type
    text = text.strip()
    if name == "eigenvalues":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if kind == "int" or kind is int:
        return int(text, 0)
    if kind == "float" or kind is float:
        return float(text)
    return text


def _constraints(cfg):
    errs = []
    if cfg.D < 1:
        errs.append("D: constraint D >= 1 violated")
    if not cfg.gamma > 0:
        errs.append("gamma: constraint gamma > 0 violated")
    if not cfg.alpha > 0:
        errs.append("alpha: constraint alpha > 0 violated")
    if cfg.eigenvalues is not None:
        if len(cfg.eigenvalues) != cfg.D:
            errs.append(f"eigenvalues: {len(cfg.eigenvalues)} values given but D={cfg.D}")
        if any(v <= 0 for v in cfg.eigenvalues) or list(cfg.eigenvalues) != sorted(cfg.eigenvalues):
            errs.append("eigenvalues: constraint positive and nondecreasing violated")
    if cfg.drift not in DRIFT_FAMILIES:
        errs.append(f"drift: unknown family {cfg.drift!r}, expected one of {', '.join(DRIFT_FAMILIES)}")
    if not cfg.amplitude >= 0:
        errs.append("amplitude: constraint amplitude >= 0 violated")
    if cfg.grid_steps < 1:
        errs.append("grid_steps: constraint grid_steps >= 1 violated")
    if not 0 < cfg.horizon <= 1:
        errs.append("horizon: constraint 0 < horizon <= 1 violated")
    if cfg.replicas < 1:
        errs.append("replicas: constraint replicas >= 1 violated")
    if not 0 <= cfg.seed < 2**64:
        errs.append("seed: constraint 0 <= seed < 2^64 violated")
    if not cfg.tolerance > 0:
        errs.append("tolerance: constraint tolerance > 0 violated")
    if cfg.max_iter < 1:
        errs.append("max_iter: constraint max_iter >= 1 violated")
    if not 0 < cfg.damping <= 1:
        errs.append("damping: constraint 0 < damping <= 1 violated")
    if cfg.quadrature_min < 1:
        errs.append("quadrature_min: constraint quadrature_min >= 1 violated")
    if not cfg.beta_A > 0:
        errs.append("beta_A: constraint beta_A > 0 violated")
    if cfg.budget < 1:
        errs.append("budget: constraint budget >= 1 violated")
    if cfg.workers < 1:
        errs.append("workers: constraint workers >= 1 violated")
    return errs


def from_mapping(pairs, base=None):
    """Build a validated config from ``{key: text}``; raises :class:`ConfigError` listing all problems."""
    errors = []
    values = {}
    for key, text in pairs.items():
        if key not in FIELDS:
            errors.append(f"{key}: unknown key")
            continue
        try:
            values[key] = _convert(key, text)
        except ValueError:
            errors.append(f"{key}: cannot parse {text!r} as {getattr(FIELDS[key].type, '__name__', FIELDS[key].type)}")
    cfg = dataclasses.replace(base or ExperimentConfig(), **values)
    errors += _constraints(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_pairs(text):
    """``({key: text}, [line errors])`` from ``key=value`` lines."""
    pairs = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value")
            continue
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs, errors


def parse_config(text, base=None):
    """Parse ``key=value`` text into an :class:`ExperimentConfig` (all defaults when empty)."""
    pairs, errors = parse_pairs(text)
    try:
        cfg = from_mapping(pairs, base)
    except ConfigError as exc:
        errors = errors + exc.errors
    if errors:
        raise ConfigError(errors)
    return cfg
