"""Model configuration files (TOML).

Layout::

    name = "canonical"          # optional

    [plant]
    theta1 = [[0.0, 0.5], [-0.5, 0.0]]
    k_energy = ...
    sigma1 = ...
    s1 = ...

    [observer]
    theta2 = ...
    sigma2 = ...
    s2 = ...
    coupling = ...              # optional, together with m_energy
    m_energy = ...

    [cost]
    pi_weight = ...
    lam = 1.0
    tau = 1.0

    [optimizer]                 # optional
    seeds = [0]
    max_iter = 5000

    [numeric]                   # optional NumericPolicy overrides

Matrices are row-major arrays of arrays.  Every problem is reported as an
:class:`InvalidSpec` naming the offending field, e.g. ``plant.k_energy``.
"""

import hashlib
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coupled import CostSpec, ObserverSpec, PlantSpec
from .cqf.optimize import OptimizerOptions
from .errors import ConfigError, InvalidSpec
from .moments import QuadPolicy
from .policy import NumericPolicy

SECTIONS = {
    "plant": ("theta1", "k_energy", "sigma1", "s1"),
    "observer": ("theta2", "sigma2", "s2", "coupling", "m_energy"),
    "cost": ("pi_weight", "lam", "tau"),
}
OPTIONAL_OBSERVER = ("coupling", "m_energy")
OPTIMIZER_KEYS = ("seeds", "gtol", "gtol_rel", "max_iter", "margin_floor")


@dataclass(frozen=True)
class ModelConfig:
    """Validated model together with its solver settings.

    ``observer`` always holds a complete :class:`ObserverSpec`; when the
    file gives no ``coupling``/``m_energy`` it carries ``L = 0, M = I`` as
    placeholders and ``has_observer`` is false.
    """

    name: str
    plant: PlantSpec
    observer: ObserverSpec
    cost: CostSpec
    has_observer: bool
    options: OptimizerOptions
    seeds: tuple
    policy: NumericPolicy
    echo: dict

    @property
    def quad(self):
        return QuadPolicy(tol=self.policy.quad_tol)

    @property
    def input_hash(self):
        return input_hash(self.echo)


def input_hash(echo):
    text = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _section(doc, name, required=True):
    sec = doc.get(name)
    if sec is None:
        if required:
            raise InvalidSpec("section is missing", name)
        return {}
    if not isinstance(sec, dict):
        raise InvalidSpec("expected a table", name)
    return sec


def _reject_unknown(sec, allowed, prefix):
    for key in sec:
        if key not in allowed:
            raise InvalidSpec("unknown field", f"{prefix}.{key}")


def _matrix(sec, key, prefix):
    path = f"{prefix}.{key}"
    if key not in sec:
        raise InvalidSpec("field is missing", path)
    value = sec[key]
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise InvalidSpec("expected a non-empty array of arrays", path)
    width = len(value[0])
    if width == 0 or any(len(r) != width for r in value):
        raise InvalidSpec("rows must be non-empty and of equal length", path)
    for row in value:
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise InvalidSpec(f"entries must be numbers, got {x!r}", path)
    arr = np.array(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidSpec("entries must be finite", path)
    return arr


def _number(sec, key, prefix, kind=float, required=True, default=None):
    path = f"{prefix}.{key}"
    if key not in sec:
        if required:
            raise InvalidSpec("field is missing", path)
        return default
    x = sec[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InvalidSpec(f"expected a number, got {x!r}", path)
    if kind is int and not isinstance(x, int):
        raise InvalidSpec(f"expected an integer, got {x!r}", path)
    return kind(x)


def _spec(build, path):
    # Re-tag validation errors raised without a field by the domain types.
    try:
        return build()
    except InvalidSpec:
        raise
    except ValueError as exc:
        raise InvalidSpec(str(exc), path) from exc


def _echo_value(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def from_mapping(doc):
    """Validate a parsed TOML document into a :class:`ModelConfig`."""
    _reject_unknown(doc, ("name", "plant", "observer", "cost", "optimizer", "numeric"), "config")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise InvalidSpec("expected a string", "name")

    psec = _section(doc, "plant")
    _reject_unknown(psec, SECTIONS["plant"], "plant")
    plant_args = {k: _matrix(psec, k, "plant") for k in SECTIONS["plant"]}
    plant = _spec(lambda: PlantSpec(**plant_args), "plant")

    osec = _section(doc, "observer")
    _reject_unknown(osec, SECTIONS["observer"], "observer")
    present = [k for k in OPTIONAL_OBSERVER if k in osec]
    if len(present) == 1:
        missing = next(k for k in OPTIONAL_OBSERVER if k not in osec)
        raise InvalidSpec("coupling and m_energy must be given together", f"observer.{missing}")
    obs_args = {k: _matrix(osec, k, "observer") for k in ("theta2", "sigma2", "s2")}
    has_observer = bool(present)
    if has_observer:
        obs_args.update({k: _matrix(osec, k, "observer") for k in OPTIONAL_OBSERVER})
    else:
        nu = obs_args["theta2"].shape[0]
        obs_args.update(coupling=np.zeros((plant.n, nu)), m_energy=np.eye(nu))
    observer = _spec(lambda: ObserverSpec(**obs_args), "observer")

    csec = _section(doc, "cost")
    _reject_unknown(csec, SECTIONS["cost"], "cost")
    cost_args = {"pi_weight": _matrix(csec, "pi_weight", "cost"),
                 "lam": _number(csec, "lam", "cost"),
                 "tau": _number(csec, "tau", "cost")}
    cost = _spec(lambda: CostSpec(**cost_args), "cost")
    _check_shapes(plant, observer, cost)

    osec2 = _section(doc, "optimizer", required=False)
    _reject_unknown(osec2, OPTIMIZER_KEYS, "optimizer")
    seeds = osec2.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds)):
        raise InvalidSpec("expected a non-empty list of non-negative integers", "optimizer.seeds")
    defaults = OptimizerOptions()
    options = OptimizerOptions(
        gtol=_number(osec2, "gtol", "optimizer", required=False),
        gtol_rel=_number(osec2, "gtol_rel", "optimizer", required=False, default=defaults.gtol_rel),
        max_iter=_number(osec2, "max_iter", "optimizer", int, False, defaults.max_iter),
        margin_floor=_number(osec2, "margin_floor", "optimizer", required=False),
    )
    for key in ("gtol", "gtol_rel", "margin_floor"):
        val = getattr(options, key)
        if val is not None and not val > 0:
            raise InvalidSpec("must be positive", f"optimizer.{key}")
    if options.max_iter < 0:
        raise InvalidSpec("must be non-negative", "optimizer.max_iter")

    nsec = _section(doc, "numeric", required=False)
    known = {f.name: f.type for f in fields(NumericPolicy)}
    _reject_unknown(nsec, known, "numeric")
    overrides = {}
    for key in nsec:
        kind = int if key == "max_moment_terms" else float
        overrides[key] = _number(nsec, key, "numeric", kind)
        if not overrides[key] > 0:
            raise InvalidSpec("must be positive", f"numeric.{key}")
    policy = NumericPolicy().updated(**overrides)

    echo = {
        "name": name,
        "plant": {k: _echo_value(getattr(plant, k)) for k in ("k_energy", "sigma1", "s1")},
        "observer": {k: _echo_value(getattr(observer, k)) for k in ("sigma2", "s2")},
        "cost": {"pi_weight": cost.pi_weight.tolist(), "lam": cost.lam, "tau": cost.tau},
        "optimizer": {"seeds": list(seeds), "gtol": options.gtol, "gtol_rel": options.gtol_rel,
                      "max_iter": options.max_iter, "margin_floor": options.margin_floor},
        "numeric": overrides,
    }
    echo["plant"]["theta1"] = plant.theta1.matrix.tolist()
    echo["observer"]["theta2"] = observer.theta2.matrix.tolist()
    if has_observer:
        echo["observer"]["coupling"] = observer.coupling.tolist()
        echo["observer"]["m_energy"] = observer.m_energy.tolist()
    return ModelConfig(name, plant, observer, cost, has_observer, options,
                       tuple(seeds), policy, echo)


def _check_shapes(plant, observer, cost):
    n, nu = plant.n, observer.nu
    if observer.coupling.shape != (n, nu):
        raise InvalidSpec(f"expected shape {(n, nu)}, got {observer.coupling.shape}",
                          "observer.coupling")
    if observer.s2.shape[0] != plant.p:
        raise InvalidSpec(f"must have {plant.p} rows to match plant.s1", "observer.s2")
    if cost.pi_weight.shape != (n, n):
        raise InvalidSpec(f"expected shape {(n, n)}, got {cost.pi_weight.shape}",
                          "cost.pi_weight")


def loads(text):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_mapping(doc)


def load(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path} is not UTF-8") from exc
    return loads(text)


__all__ = ["ModelConfig", "load", "loads", "from_mapping", "input_hash"]
