"""Scenario configuration: YAML schema, validation and canonical form.

Schema version 1 (top-level keys; all but ``esr_config`` optional)::

    esr_config: 1
    name: str
    seed: uint64
    samples: int >= 1
    batch_size: int >= 1            # Monte Carlo batch length
    z_fail_fraction: float          # allowed share of |z| > 3
    states: {name: state spec}
    observables: {name: observable spec}
    protocols: [{name, state, steps: [{observable, outcomes?}]}]
    bell: {name: {state, dims, settings: {a, a_prime, b, b_prime}, detection?}}
    sweeps: {name: {scenario, p: {start, stop, step} | [values]}}

See the README for the state, observable and detection sub-schemas.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from ..bell import BellScenario, LocalGenObservable, singlet
from ..observables import (
    DiscreteObservable,
    GeneralizedObservable,
    OverlapInterpolated,
    PerOutcome,
    Uniform,
    bloch_direction,
    spin_observable,
)
from ..states import OperationalMixture, PureState

SCHEMA_VERSION = 1
MAX_SEED = 2**64 - 1

DEFAULTS = {
    "name": "",
    "seed": 0,
    "samples": 1000,
    "batch_size": 100000,
    "z_fail_fraction": 0.01,
}

TOP_KEYS = {"esr_config", "name", "seed", "samples", "batch_size", "z_fail_fraction",
            "states", "observables", "protocols", "bell", "sweeps"}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Protocol:
    name: str
    state_name: str
    state: Any
    steps: list  # of (observable name, GeneralizedObservable, outcome set or None)


@dataclass
class ScenarioConfig:
    canonical: dict
    states: dict = field(default_factory=dict)
    observables: dict = field(default_factory=dict)
    protocols: list = field(default_factory=list)
    bell: dict = field(default_factory=dict)
    sweeps: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.canonical["seed"]

    @property
    def samples(self) -> int:
        return self.canonical["samples"]

    @property
    def name(self) -> str:
        return self.canonical["name"]

    def dump(self) -> str:
        return dump_canonical(self.canonical)

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode("utf-8")).hexdigest()


def dump_canonical(canonical: dict) -> str:
    return yaml.safe_dump(canonical, sort_keys=True, default_flow_style=None, width=100)


# -- scalar helpers ------------------------------------------------------------

def _complex(v, path):
    if isinstance(v, bool):
        raise ConfigError(path, "expected a number")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(path, f"cannot read {v!r} as a complex number")


def _canon_complex(z: complex):
    return [float(z.real), float(z.imag)]


def _float(v, path, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(path, f"{v} outside [{lo}, {hi}]")
    return v


def _int(v, path, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(path, f"{v} outside [{lo}, {hi}]")
    return v


def _mapping(v, path):
    if not isinstance(v, dict):
        raise ConfigError(path, "expected a mapping")
    return v


def _list(v, path):
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list")
    return v


def _vector(v, path):
    items = _list(v, path)
    if not items:
        raise ConfigError(path, "empty vector")
    return np.array([_complex(z, f"{path}[{i}]") for i, z in enumerate(items)])


def _matrix(v, path):
    rows = _list(v, path)
    out = np.array([_vector(r, f"{path}[{i}]") for i, r in enumerate(rows)])
    if out.ndim != 2:
        raise ConfigError(path, "ragged matrix")
    return out


def _unknown(spec, allowed, path):
    extra = set(spec) - set(allowed)
    if extra:
        raise ConfigError(path, f"unknown keys {sorted(extra)}")


# -- states --------------------------------------------------------------------

def _pure_from_spec(spec, path, pure):
    if "vector" in spec:
        _unknown(spec, {"vector"}, path)
        v = _vector(spec["vector"], f"{path}.vector")
        try:
            return PureState(v), {"vector": [_canon_complex(z) for z in v]}
        except ValueError as exc:
            raise ConfigError(f"{path}.vector", str(exc)) from None
    builder = spec.get("builder")
    if builder == "basis":
        _unknown(spec, {"builder", "dim", "index"}, path)
        dim = _int(spec.get("dim"), f"{path}.dim", 1, 64)
        idx = _int(spec.get("index"), f"{path}.index", 0, dim - 1)
        v = np.zeros(dim, dtype=complex)
        v[idx] = 1
        return PureState(v), {"builder": "basis", "dim": dim, "index": idx}
    if builder == "singlet":
        _unknown(spec, {"builder"}, path)
        return singlet(), {"builder": "singlet"}
    if builder == "bloch":
        _unknown(spec, {"builder", "theta_deg", "phi_deg"}, path)
        th = _float(spec.get("theta_deg", 0.0), f"{path}.theta_deg")
        ph = _float(spec.get("phi_deg", 0.0), f"{path}.phi_deg")
        t, p = np.radians(th), np.radians(ph)
        v = np.array([np.cos(t / 2), np.exp(1j * p) * np.sin(t / 2)])
        return PureState(v), {"builder": "bloch", "theta_deg": th, "phi_deg": ph}
    if builder == "product":
        _unknown(spec, {"builder", "factors"}, path)
        names = _list(spec.get("factors"), f"{path}.factors")
        vec = np.ones(1, dtype=complex)
        for i, n in enumerate(names):
            if n not in pure:
                raise ConfigError(f"{path}.factors[{i}]", f"unknown pure state {n!r} (define it earlier)")
            vec = np.kron(vec, pure[n].vector)
        return PureState(vec), {"builder": "product", "factors": list(names)}
    raise ConfigError(path, "state needs 'vector', 'builder' or 'mixture'")


def _parse_mixture(spec, p, pure):
    _unknown(spec, {"mixture"}, p)
    comps, ccomps = [], []
    for i, item in enumerate(_list(spec["mixture"], f"{p}.mixture")):
        ip = f"{p}.mixture[{i}]"
        item = _mapping(item, ip)
        _unknown(item, {"weight", "state"}, ip)
        w = _float(item.get("weight"), f"{ip}.weight", 0.0, 1.0)
        ref = item.get("state")
        if ref not in pure:
            raise ConfigError(f"{ip}.state", f"unknown pure state {ref!r}")
        comps.append((w, pure[ref]))
        ccomps.append({"weight": w, "state": ref})
    try:
        return OperationalMixture(tuple(comps)), {"mixture": ccomps}
    except ValueError as exc:
        raise ConfigError(f"{p}.mixture", str(exc)) from None


def _parse_states(raw, path):
    raw = _mapping(raw, path)
    specs = {name: _mapping(spec, f"{path}.{name}") for name, spec in raw.items()}
    built, pure = {}, {}
    # products may reference each other in any order: resolve until stuck
    pending = [n for n, s in specs.items() if "mixture" not in s]
    while pending:
        progress = []
        for name in pending:
            spec = specs[name]
            if spec.get("builder") == "product":
                factors = spec.get("factors")
                if isinstance(factors, list) and any(f in specs and f not in pure for f in factors):
                    continue
            built[name] = _pure_from_spec(spec, f"{path}.{name}", pure)
            pure[name] = built[name][0]
            progress.append(name)
        if not progress:
            raise ConfigError(f"{path}.{pending[0]}", "circular product-state references")
        pending = [n for n in pending if n not in progress]
    for name, spec in specs.items():
        if "mixture" in spec:
            built[name] = _parse_mixture(spec, f"{path}.{name}", pure)
    states = {n: built[n][0] for n in specs}
    canon = {n: built[n][1] for n in specs}
    return states, canon, pure


# -- detection and observables ---------------------------------------------------

def _parse_detection(spec, path, k, pure, dim=None):
    if spec is None:
        return Uniform(1.0), {"uniform": 1.0}
    spec = _mapping(spec, path)
    if len(spec) != 1:
        raise ConfigError(path, "detection model needs exactly one of uniform, per_outcome, overlap")
    (kind, val), = spec.items()
    if kind == "uniform":
        p = _float(val, f"{path}.uniform", 0.0, 1.0)
        return Uniform(p), {"uniform": p}
    if kind == "per_outcome":
        ps = [_float(v, f"{path}.per_outcome[{i}]", 0.0, 1.0) for i, v in enumerate(_list(val, f"{path}.per_outcome"))]
        if k is not None and len(ps) != k:
            raise ConfigError(f"{path}.per_outcome", f"expected {k} values, got {len(ps)}")
        return PerOutcome(tuple(ps)), {"per_outcome": ps}
    if kind == "overlap":
        op = f"{path}.overlap"
        val = _mapping(val, op)
        _unknown(val, {"reference", "at_reference", "orthogonal"}, op)
        ref = val.get("reference")
        if ref not in pure:
            raise ConfigError(f"{op}.reference", f"unknown pure state {ref!r}")
        if dim is not None and pure[ref].dim != dim:
            raise ConfigError(f"{op}.reference", f"state {ref!r} has dimension {pure[ref].dim}, observable acts on {dim}")
        at = [_float(v, f"{op}.at_reference[{i}]", 0.0, 1.0) for i, v in enumerate(_list(val.get("at_reference"), f"{op}.at_reference"))]
        orth = [_float(v, f"{op}.orthogonal[{i}]", 0.0, 1.0) for i, v in enumerate(_list(val.get("orthogonal"), f"{op}.orthogonal"))]
        if k is not None and (len(at) != k or len(orth) != k):
            raise ConfigError(op, f"expected {k} values in at_reference and orthogonal")
        model = OverlapInterpolated(tuple(pure[ref].vector), tuple(at), tuple(orth))
        return model, {"overlap": {"reference": ref, "at_reference": at, "orthogonal": orth}}
    raise ConfigError(path, f"unknown detection model {kind!r}")


def _direction(spec, path):
    if "axis" in spec:
        axis = spec["axis"]
        dirs = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
        if axis not in dirs:
            raise ConfigError(f"{path}.axis", f"expected x, y or z, got {axis!r}")
        return dirs[axis], {"axis": axis}
    if "direction" in spec:
        d = [_float(v, f"{path}.direction[{i}]") for i, v in enumerate(_list(spec["direction"], f"{path}.direction"))]
        if len(d) != 3 or np.linalg.norm(d) == 0:
            raise ConfigError(f"{path}.direction", "expected a nonzero 3-vector")
        d = list(np.asarray(d) / np.linalg.norm(d))
        return tuple(d), {"direction": [float(v) for v in d]}
    if "theta_deg" in spec or "phi_deg" in spec:
        th = _float(spec.get("theta_deg", 0.0), f"{path}.theta_deg")
        ph = _float(spec.get("phi_deg", 0.0), f"{path}.phi_deg")
        return tuple(bloch_direction(th, ph)), {"theta_deg": th, "phi_deg": ph}
    return None, None


def _parse_observables(raw, path, pure):
    obs, canon = {}, {}
    for name, spec in _mapping(raw, path).items():
        p = f"{path}.{name}"
        spec = _mapping(spec, p)
        _unknown(spec, {"axis", "direction", "theta_deg", "phi_deg", "operator", "eigenvalues",
                        "projectors", "a0", "detection"}, p)
        a0 = _float(spec.get("a0", 0.0), f"{p}.a0")
        direction, c = _direction(spec, p)
        try:
            if direction is not None:
                base = spin_observable(direction).base
            elif "operator" in spec:
                m = _matrix(spec["operator"], f"{p}.operator")
                base = DiscreteObservable.from_operator(m)
                c = {"operator": [[_canon_complex(z) for z in row] for row in m]}
            elif "eigenvalues" in spec:
                vals = [_float(v, f"{p}.eigenvalues[{i}]") for i, v in enumerate(_list(spec["eigenvalues"], f"{p}.eigenvalues"))]
                projs = [_matrix(m, f"{p}.projectors[{i}]") for i, m in enumerate(_list(spec.get("projectors"), f"{p}.projectors"))]
                base = DiscreteObservable(tuple(vals), tuple(projs))
                c = {"eigenvalues": vals,
                     "projectors": [[[_canon_complex(z) for z in row] for row in m] for m in projs]}
            else:
                raise ConfigError(p, "observable needs axis, direction, theta_deg/phi_deg, operator or eigenvalues")
            det, cdet = _parse_detection(spec.get("detection"), f"{p}.detection", len(base.outcomes), pure, base.dim)
            obs[name] = GeneralizedObservable(base, a0, det, name)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(p, str(exc)) from None
        canon[name] = {**c, "a0": a0, "detection": cdet}
    return obs, canon


def _outcome_index(g, v, path):
    if v == "a0":
        return 0
    try:
        return g.index_of(_float(v, path))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_protocols(raw, path, states, obs):
    protocols, canon = [], []
    names = set()
    for i, spec in enumerate(_list(raw, path)):
        p = f"{path}[{i}]"
        spec = _mapping(spec, p)
        _unknown(spec, {"name", "state", "steps"}, p)
        name = spec.get("name", f"protocol{i}")
        if not isinstance(name, str) or name in names:
            raise ConfigError(f"{p}.name", f"protocol name must be a unique string, got {name!r}")
        names.add(name)
        sname = spec.get("state")
        if sname not in states:
            raise ConfigError(f"{p}.state", f"unknown state {sname!r}")
        state = states[sname]
        steps, csteps = [], []
        for j, step in enumerate(_list(spec.get("steps", []), f"{p}.steps")):
            sp = f"{p}.steps[{j}]"
            step = _mapping(step, sp)
            _unknown(step, {"observable", "outcomes"}, sp)
            oname = step.get("observable")
            if oname not in obs:
                raise ConfigError(f"{sp}.observable", f"unknown observable {oname!r}")
            g = obs[oname]
            if g.dim != state.dim:
                raise ConfigError(sp, f"observable {oname!r} acts on dimension {g.dim}, state has {state.dim}")
            if "outcomes" in step:
                vals = _list(step["outcomes"], f"{sp}.outcomes")
                x = frozenset(_outcome_index(g, v, f"{sp}.outcomes[{k}]") for k, v in enumerate(vals))
                steps.append((oname, g, x))
                csteps.append({"observable": oname, "outcomes": ["a0" if n == 0 else g.value_of(n) for n in sorted(x)]})
            else:
                steps.append((oname, g, None))
                csteps.append({"observable": oname})
        protocols.append(Protocol(name, sname, state, steps))
        canon.append({"name": name, "state": sname, "steps": csteps})
    return protocols, canon


SETTING_NAMES = ("a", "a_prime", "b", "b_prime")


def _parse_bell(raw, path, states, pure):
    out, canon = {}, {}
    for name, spec in _mapping(raw, path).items():
        p = f"{path}.{name}"
        spec = _mapping(spec, p)
        _unknown(spec, {"state", "dims", "settings", "detection"}, p)
        sname = spec.get("state")
        if sname not in pure:
            raise ConfigError(f"{p}.state", f"unknown pure state {sname!r}")
        dims = spec.get("dims", [2, 2])
        dims = [_int(d, f"{p}.dims[{i}]", 2, 2) for i, d in enumerate(_list(dims, f"{p}.dims"))]
        if len(dims) != 2:
            raise ConfigError(f"{p}.dims", "expected two dimensions")
        if pure[sname].dim != dims[0] * dims[1]:
            raise ConfigError(f"{p}.state", f"state dimension {pure[sname].dim} does not match dims {dims}")
        default_det = spec.get("detection")
        settings = _mapping(spec.get("settings"), f"{p}.settings")
        _unknown(settings, SETTING_NAMES, f"{p}.settings")
        locs, csettings = [], {}
        for k, sn in enumerate(SETTING_NAMES):
            sp = f"{p}.settings.{sn}"
            if sn not in settings:
                raise ConfigError(sp, "missing setting")
            s = _mapping(settings[sn], sp)
            _unknown(s, {"axis", "direction", "theta_deg", "phi_deg", "detection"}, sp)
            direction, c = _direction(s, sp)
            if direction is None:
                raise ConfigError(sp, "setting needs axis, direction or theta_deg/phi_deg")
            dspec = s.get("detection", default_det)
            det, cdet = _parse_detection(dspec, f"{sp}.detection", 2, {})
            locs.append(LocalGenObservable(direction, det, side=1 if k < 2 else 2, label=sn))
            csettings[sn] = {**c, "detection": cdet}
        out[name] = BellScenario(pure[sname], *locs, dims=tuple(dims))
        canon[name] = {"state": sname, "dims": dims, "settings": csettings}
    return out, canon


def _parse_sweeps(raw, path, bell):
    out, canon = {}, {}
    for name, spec in _mapping(raw, path).items():
        p = f"{path}.{name}"
        spec = _mapping(spec, p)
        _unknown(spec, {"scenario", "p"}, p)
        sc = spec.get("scenario")
        if sc not in bell:
            raise ConfigError(f"{p}.scenario", f"unknown bell scenario {sc!r}")
        grid = spec.get("p")
        if isinstance(grid, dict):
            _unknown(grid, {"start", "stop", "step"}, f"{p}.p")
            start = _float(grid.get("start"), f"{p}.p.start", 0.0, 1.0)
            stop = _float(grid.get("stop"), f"{p}.p.stop", 0.0, 1.0)
            step = _float(grid.get("step"), f"{p}.p.step", 1e-9)
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ConfigError(f"{p}.p", "empty grid")
            ps = [round(start + i * step, 12) for i in range(count)]
            cgrid = {"start": start, "stop": stop, "step": step}
        else:
            ps = [_float(v, f"{p}.p[{i}]", 0.0, 1.0) for i, v in enumerate(_list(grid, f"{p}.p"))]
            cgrid = ps
        out[name] = (sc, ps)
        canon[name] = {"scenario": sc, "p": cgrid}
    return out, canon


def parse_config(data) -> ScenarioConfig:
    """Validate a decoded config mapping and build the model objects."""
    data = _mapping(data, "$")
    _unknown(data, TOP_KEYS, "$")
    version = data.get("esr_config")
    if version != SCHEMA_VERSION:
        raise ConfigError("$.esr_config", f"expected schema version {SCHEMA_VERSION}, got {version!r}")
    canon = {"esr_config": SCHEMA_VERSION}
    name = data.get("name", DEFAULTS["name"])
    if not isinstance(name, str):
        raise ConfigError("$.name", "expected a string")
    canon["name"] = name
    canon["seed"] = _int(data.get("seed", DEFAULTS["seed"]), "$.seed", 0, MAX_SEED)
    canon["samples"] = _int(data.get("samples", DEFAULTS["samples"]), "$.samples", 1)
    canon["batch_size"] = _int(data.get("batch_size", DEFAULTS["batch_size"]), "$.batch_size", 1)
    canon["z_fail_fraction"] = _float(data.get("z_fail_fraction", DEFAULTS["z_fail_fraction"]), "$.z_fail_fraction", 0.0, 1.0)

    cfg = ScenarioConfig(canonical=canon)
    cfg.states, canon["states"], pure = _parse_states(data.get("states", {}), "$.states")
    cfg.observables, canon["observables"] = _parse_observables(data.get("observables", {}), "$.observables", pure)
    cfg.protocols, canon["protocols"] = _parse_protocols(data.get("protocols", []), "$.protocols", cfg.states, cfg.observables)
    cfg.bell, canon["bell"] = _parse_bell(data.get("bell", {}), "$.bell", cfg.states, pure)
    cfg.sweeps, canon["sweeps"] = _parse_sweeps(data.get("sweeps", {}), "$.sweeps", cfg.bell)
    return cfg


def loads(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("$", f"not valid YAML: {exc}") from None
    return parse_config(data)


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
