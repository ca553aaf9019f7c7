"""Run configuration: YAML parsing with line tracking, validation and sweep expansion.

A configuration is a nested mapping::

    mass: 1.0
    regime: fixed_direction            # sharp | fixed_direction | general
    state:
      momentum_a: [0, 0, 1]            # sharp
      momentum_b: [0, 0, -1]
      profile_a: {kind: gaussian, k0: 1.0, sigma: 0.1}   # or rectangular / packet
      profile_b: {kind: rectangular, kmin: 0.5, kmax: 1.5}
      direction_a: [0, 0, 1]           # fixed_direction
      direction_b: [0, 0, -1]
    detectors:
      a: {shape: box, center: [0, 0, 0], sides: [5, 5, 5]}
      b: {shape: ball, center: [0, 0, 0], radius: 2.5}
    measurement: {a: [0, 0, 1], b: [1, 0, 0]}
    chsh: {a: ..., aprime: ..., b: ..., bprime: ...}
    sweep:                             # one or two axes
      - {target: measurement.b, mode: angle, plane: [[0, 0, 1], [1, 0, 0]],
         start: 0, stop: 3.14159, steps: 19}
      # mode: angle     -> vector = |v| (cos x e1 + sin x e2) in ``plane``
      # mode: magnitude -> vector = x * direction (default: current direction)
      # mode: scalar    -> value = x
      # also: [{target: state.direction_b, sign: -1}] ties further targets
    quadrature: {nodes: 64, tail: 1.0e-10, target_rel_error: 1.0e-8,
                 max_refinements: 2, nodes_3d: 6, node_cap: 5000000, mc_seed: 0}
    output: {format: csv, path: out.csv}
    seed: 0
"""
from __future__ import annotations

import copy
import itertools
import math

import numpy as np
import yaml

from .detector import AllSpace, Ball, Box
from .exceptions import DomainError
from .integrals import QuadratureSpec, min_nodes_1d
from .wavepacket import Gaussian, GaussianPacket, Rectangular

REGIMES = ("sharp", "fixed_direction", "general")
SWEEP_MODES = ("angle", "magnitude", "scalar")
QUADRATURE_KEYS = {
    "nodes": "nodes_1d",
    "tail": "truncation_tail",
    "max_refinements": "max_refinements",
    "target_rel_error": "target_rel_error",
    "nodes_3d": "nodes_3d",
    "node_cap": "node_cap",
    "mc_replicates": "mc_replicates",
    "mc_seed": "mc_seed",
}


class ConfigError(ValueError):
    """The configuration text cannot be parsed."""


def parse_config(text):
    """Parse YAML text into ``(data, lines)``; ``lines`` maps dotted paths to 1-based line numbers."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}{getattr(exc, 'problem', exc)}") from None
    if node is None:
        raise ConfigError("line 1: configuration is empty")
    lines = {}
    data = _construct(node, "", lines)
    if not isinstance(data, dict):
        raise ConfigError("line 1: configuration must be a mapping")
    return data, lines


def _construct(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = str(key_node.value)
            sub = f"{path}.{key}" if path else key
            out[key] = _construct(value_node, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    if node.tag == "tag:yaml.org,2002:str":
        return _maybe_number(node.value)
    return _SCALARS.construct_object(node)


_SCALARS = yaml.SafeLoader("")


def _maybe_number(text):
    # PyYAML reads "1e-10" as a string; accept it as a number.
    try:
        return float(text) if any(c in text for c in ".eE") or text.lstrip("+-").isdigit() else text
    except ValueError:
        return text


def get_path(data, path):
    cur = data
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(path)
        cur = cur[part]
    return cur


def set_path(data, path, value):
    parts = path.split(".")
    cur = data
    for part in parts[:-1]:
        cur = cur.setdefault(part, {})
    cur[parts[-1]] = value


class _Report:
    def __init__(self, lines):
        self.lines = lines
        self.messages = []

    def add(self, path, message):
        probe = path
        while probe and probe not in self.lines:
            probe = probe.rpartition(".")[0]
        line = self.lines.get(probe, 1)
        text = f"line {line}: {path}: {message}"
        if text not in self.messages:
            self.messages.append(text)


def _number(report, data, path, *, positive=False, nonneg=False, integer=False, default=None, label=None):
    where = label or path
    try:
        value = get_path(data, path)
    except KeyError:
        if default is not None:
            return default
        report.add(where, "missing value")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        report.add(where, f"expected a finite number, got {value!r}")
        return None
    if integer and float(value) != int(value):
        report.add(where, f"expected an integer, got {value!r}")
        return None
    if positive and not value > 0:
        report.add(where, f"must be > 0, got {value!r}")
        return None
    if nonneg and not value >= 0:
        report.add(where, f"must be >= 0, got {value!r}")
        return None
    return int(value) if integer else float(value)


def _vector(report, data, path, *, unit=False, required=True):
    try:
        value = get_path(data, path)
    except KeyError:
        if required:
            report.add(path, "missing 3-vector")
        return None
    if (not isinstance(value, list) or len(value) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in value)):
        report.add(path, f"expected a list of three finite numbers, got {value!r}")
        return None
    vec = np.array(value, dtype=float)
    if unit and abs(np.linalg.norm(vec) - 1.0) > 1e-9:
        report.add(path, f"must be a unit vector, |v| = {np.linalg.norm(vec):.12g}")
        return None
    return vec


def _profile(report, data, path, regime):
    try:
        spec = get_path(data, path)
    except KeyError:
        report.add(path, "missing profile")
        return None
    if not isinstance(spec, dict):
        report.add(path, "profile must be a mapping with a 'kind'")
        return None
    kind = spec.get("kind")
    amp = _number(report, data, f"{path}.amplitude", positive=True, default=1.0)
    if kind == "gaussian":
        k0 = _number(report, data, f"{path}.k0", nonneg=True)
        sigma = _number(report, data, f"{path}.sigma", positive=True)
        return None if None in (k0, sigma, amp) else Gaussian(k0, sigma, amp)
    if kind == "rectangular":
        kmin = _number(report, data, f"{path}.kmin", nonneg=True)
        kmax = _number(report, data, f"{path}.kmax", positive=True)
        if None in (kmin, kmax, amp):
            return None
        if not kmax > kmin:
            report.add(f"{path}.kmax", f"support [{kmin}, {kmax}] is empty (kmax must exceed kmin)")
            return None
        return Rectangular(kmin, kmax, amp)
    if kind == "packet":
        if regime != "general":
            report.add(f"{path}.kind", "3D packets are only available in the general regime")
            return None
        center = _vector(report, data, f"{path}.center")
        sigma = _number(report, data, f"{path}.sigma", positive=True)
        return None if center is None or sigma is None or amp is None else GaussianPacket(center, sigma, amp)
    report.add(f"{path}.kind", f"unknown profile kind {kind!r} (gaussian, rectangular, packet)")
    return None


def _detector(report, data, path):
    try:
        spec = get_path(data, path)
    except KeyError:
        report.add(path, "missing detector")
        return None
    if not isinstance(spec, dict):
        report.add(path, "detector must be a mapping with a 'shape'")
        return None
    shape = spec.get("shape")
    if shape == "all_space":
        return AllSpace()
    center = _vector(report, data, f"{path}.center", required=False)
    center = np.zeros(3) if center is None else center
    if shape == "box":
        sides = _vector(report, data, f"{path}.sides")
        if sides is None:
            return None
        if np.any(sides <= 0):
            report.add(f"{path}.sides", f"side lengths must be > 0, got {sides.tolist()}")
            return None
        rotation = np.eye(3)
        if "rotation" in spec:
            rot = np.asarray(spec["rotation"], dtype=float) if isinstance(spec["rotation"], list) else None
            if rot is None or rot.shape != (3, 3) or not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
                report.add(f"{path}.rotation", "rotation must be an orthogonal 3x3 matrix")
                return None
            rotation = rot
        return Box(center, sides, rotation)
    if shape == "ball":
        radius = _number(report, data, f"{path}.radius", positive=True)
        return None if radius is None else Ball(center, radius)
    report.add(f"{path}.shape", f"unknown detector shape {shape!r} (box, ball, all_space)")
    return None


def quadrature_spec(data, report=None):
    """Build the QuadratureSpec of a configuration (``seed`` feeds ``mc_seed`` by default)."""
    report = report or _Report({})
    section = data.get("quadrature", {}) or {}
    kwargs = {}
    if not isinstance(section, dict):
        report.add("quadrature", "must be a mapping")
        section = {}
    for key in section:
        if key not in QUADRATURE_KEYS:
            report.add(f"quadrature.{key}", f"unknown key (allowed: {', '.join(QUADRATURE_KEYS)})")
    for key, field_name in QUADRATURE_KEYS.items():
        if key in section:
            integer = field_name not in ("truncation_tail", "target_rel_error")
            value = _number(report, data, f"quadrature.{key}", integer=integer)
            if value is not None:
                kwargs[field_name] = value
    if "mc_seed" not in kwargs and isinstance(data.get("seed"), int):
        kwargs["mc_seed"] = data["seed"]
    try:
        return QuadratureSpec(**kwargs)
    except DomainError:
        probe = QuadratureSpec.__new__(QuadratureSpec)
        defaults = QuadratureSpec()
        for name in QUADRATURE_KEYS.values():
            object.__setattr__(probe, name, kwargs.get(name, getattr(defaults, name)))
        inverse = {v: k for k, v in QUADRATURE_KEYS.items()}
        for problem in probe.problems():
            name = problem.split()[0]
            report.add(f"quadrature.{inverse.get(name, name)}", problem)
        return None


class Point:
    """Fully built objects for one evaluation point."""

    def __init__(self, regime, mass, state, detectors, measurement, chsh_dirs, spec):
        self.regime = regime
        self.mass = mass
        self.state = state
        self.detectors = detectors
        self.measurement = measurement
        self.chsh = chsh_dirs
        self.spec = spec


def build_point(data, command, report=None):
    """Validate one (sweep-expanded) configuration and build its objects.

    Returns ``None`` when ``report`` collected problems.
    """
    report = report or _Report({})
    before = len(report.messages)
    mass = _number(report, data, "mass", positive=True, default=1.0)
    regime = data.get("regime")
    if regime not in REGIMES:
        report.add("regime", f"must be one of {', '.join(REGIMES)}, got {regime!r}")
        regime = None
    state = {}
    if regime == "sharp":
        state["momentum_a"] = _vector(report, data, "state.momentum_a")
        state["momentum_b"] = _vector(report, data, "state.momentum_b")
    elif regime in ("fixed_direction", "general"):
        state["profile_a"] = _profile(report, data, "state.profile_a", regime)
        state["profile_b"] = _profile(report, data, "state.profile_b", regime)
        if regime == "fixed_direction":
            state["direction_a"] = _vector(report, data, "state.direction_a", unit=True)
            state["direction_b"] = _vector(report, data, "state.direction_b", unit=True)
    detectors = {}
    for side in ("a", "b"):
        if regime == "sharp" and f"detectors.{side}" not in _flat_keys(data):
            detectors[side] = AllSpace()
            continue
        det = _detector(report, data, f"detectors.{side}")
        if isinstance(det, AllSpace) and regime in ("fixed_direction", "general"):
            report.add(f"detectors.{side}.shape",
                       "all_space has a delta-function kernel; use regime: sharp for unlocalized measurements")
            det = None
        detectors[side] = det
    measurement = chsh_dirs = None
    if command in ("correlate", "sweep"):
        measurement = (_vector(report, data, "measurement.a", unit=True),
                       _vector(report, data, "measurement.b", unit=True))
    elif command == "chsh":
        chsh_dirs = tuple(_vector(report, data, f"chsh.{k}", unit=True) for k in ("a", "aprime", "b", "bprime"))
    spec = quadrature_spec(data, report)
    if regime == "fixed_direction" and spec is not None:
        for side in ("a", "b"):
            prof, direc, det = state.get(f"profile_{side}"), state.get(f"direction_{side}"), detectors.get(side)
            if prof is None or direc is None or det is None:
                continue
            need = min_nodes_1d(prof, direc, det, spec.truncation_tail)
            if spec.nodes_1d < need:
                report.add("quadrature.nodes",
                           f"nodes_1d={spec.nodes_1d} is below the oscillation bound "
                           f"8 + ceil((tmax - tmin) * L / pi) for detector {side}; minimum admissible value is {need}")
    if len(report.messages) > before:
        return None
    return Point(regime, mass, state, detectors, measurement, chsh_dirs, spec)


def _flat_keys(data, prefix=""):
    keys = set()
    for k, v in data.items():
        path = f"{prefix}.{k}" if prefix else k
        keys.add(path)
        if isinstance(v, dict):
            keys |= _flat_keys(v, path)
    return keys


def _axis_values(report, axis, i):
    base = f"sweep[{i}]"
    start = _number(report, axis, "start", label=f"{base}.start")
    stop = _number(report, axis, "stop", label=f"{base}.stop")
    steps = _number(report, axis, "steps", integer=True, label=f"{base}.steps")
    if None in (start, stop, steps):
        return None
    if steps < 1:
        report.add(f"{base}.steps", f"steps must be >= 1, got {steps}")
        return None
    return [start] if steps == 1 else list(np.linspace(start, stop, steps))


def _apply(point, target, mode, value, plane, sign=1.0, direction=None):
    if mode == "scalar":
        set_path(point, target, sign * float(value))
        return
    old = np.array(get_path(point, target), dtype=float)
    size = float(np.linalg.norm(old))
    if mode == "angle":
        e1, e2 = plane
        vec = (size if size > 0 else 1.0) * (math.cos(value) * e1 + math.sin(value) * e2)
    else:
        if direction is None:
            if size == 0:
                raise DomainError(f"cannot scale the zero vector {target}; give the axis a 'direction'")
            direction = old / size
        vec = float(value) * direction
    set_path(point, target, [float(x) for x in sign * vec])


def _direction(report, entry, label):
    if "direction" not in entry:
        return None
    raw = entry["direction"]
    try:
        vec = np.asarray(raw, dtype=float)
        if vec.shape != (3,) or not np.linalg.norm(vec) > 0:
            raise ValueError
    except (ValueError, TypeError):
        report.add(label, f"direction must be a non-zero 3-vector, got {raw!r}")
        return None
    return vec / np.linalg.norm(vec)


def expand_sweep(data, lines=None):
    """Expand the ``sweep`` section into ``(values, report)``.

    ``values`` is a list of ``(sweep_values, point_data)`` pairs in row-major
    order of the axes.
    """
    report = _Report(lines or {})
    axes = data.get("sweep")
    if axes is None:
        return [((), copy.deepcopy(data))], report
    if isinstance(axes, dict):
        axes = [axes]
    if not isinstance(axes, list) or not axes:
        report.add("sweep", "must be a mapping or a non-empty list of axes")
        return [], report
    prepared = []
    for i, axis in enumerate(axes):
        base = f"sweep[{i}]"
        if not isinstance(axis, dict):
            report.add(base, "axis must be a mapping")
            continue
        target = axis.get("target")
        mode = axis.get("mode", "scalar")
        if mode not in SWEEP_MODES:
            report.add(f"{base}.mode", f"mode must be one of {', '.join(SWEEP_MODES)}")
            continue
        also = [t for t in axis.get("also", []) if isinstance(t, dict)]
        targets = [(target, 1.0, _direction(report, axis, f"{base}.direction"))] + [
            (t.get("target"), float(t.get("sign", 1.0)), _direction(report, t, f"{base}.also.direction"))
            for t in also]
        ok = True
        for tgt, _, _ in targets:
            try:
                current = get_path(data, tgt) if isinstance(tgt, str) else None
            except KeyError:
                current = None
            if current is None:
                report.add(f"{base}.target", f"target {tgt!r} does not name an existing config value")
                ok = False
            elif mode != "scalar" and not (isinstance(current, list) and len(current) == 3):
                report.add(f"{base}.target", f"{mode} sweeps need a 3-vector target, {tgt} is {current!r}")
                ok = False
        plane = None
        if mode == "angle":
            raw = axis.get("plane", [[1, 0, 0], [0, 1, 0]])
            try:
                e1 = np.asarray(raw[0], float)
                e1 = e1 / np.linalg.norm(e1)
                e2 = np.asarray(raw[1], float) - (np.asarray(raw[1], float) @ e1) * e1
                e2 = e2 / np.linalg.norm(e2)
                if not (np.all(np.isfinite(e1)) and np.all(np.isfinite(e2))):
                    raise ValueError
                plane = (e1, e2)
            except (ValueError, TypeError, IndexError):
                report.add(f"{base}.plane", "plane must be two linearly independent 3-vectors")
                ok = False
        values = _axis_values(report, axis, i)
        if values is None or not ok:
            continue
        prepared.append((targets, mode, plane, values))
    if len(report.messages):
        return [], report
    out = []
    for combo in itertools.product(*[p[3] for p in prepared]):
        point = copy.deepcopy(data)
        point.pop("sweep", None)
        try:
            for i, ((targets, mode, plane, _), value) in enumerate(zip(prepared, combo)):
                for tgt, sign, direction in targets:
                    _apply(point, tgt, mode, value, plane, sign, direction)
        except DomainError as exc:
            report.add(f"sweep[{i}].target", str(exc))
            return [], report
        out.append((tuple(float(v) for v in combo), point))
    return out, report


def validate(data, lines, command):
    """All violated invariants of a configuration as ``line N: path: message`` strings."""
    points, report = expand_sweep(data, lines)
    if command == "correlate" and "sweep" in data:
        report.add("sweep", "the correlate subcommand evaluates a single point; use the sweep subcommand")
    sweep = data.get("sweep")
    if isinstance(sweep, list) and len(sweep) > 2:
        report.add("sweep", f"at most two sweep axes are supported, got {len(sweep)}")
    if command == "sweep" and "sweep" not in data:
        report.add("sweep", "missing sweep section")
    fmt = (data.get("output") or {}).get("format", "csv") if isinstance(data.get("output", {}), dict) else None
    if fmt not in ("csv", "json"):
        report.add("output.format", f"must be csv or json, got {fmt!r}")
    if "seed" in data and not (isinstance(data["seed"], int) and not isinstance(data["seed"], bool)):
        report.add("seed", f"seed must be an integer, got {data['seed']!r}")
    for _, point in points:
        build_point(point, command, report)
    return report.messages
