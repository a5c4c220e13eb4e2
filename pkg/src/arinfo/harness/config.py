"""Experiment configuration files.

The format is INI-style: four sections, flat keys, no nesting::

    [model]
    truth = 0.5

    [class]
    mode = grid            ; or: explicit
    center = 0
    radius = 0.9
    points_per_axis = 5
    ; members = 0.5 | -0.5 | 0.9      (explicit mode)

    [experiment]
    horizons = 10, 40, 160
    trials = 2000          ; default 1000
    mc_samples = 100000    ; default 100000
    base_seed = 0          ; default 0

    [output]
    path = report.csv      ; optional, --output overrides

Matrices are written row-major with ``;`` between rows and ``,`` between
entries, e.g. ``0.9,0.1;0,0.8``.  The truth is always injected into the
class (appended if absent).
"""

import configparser
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..inference import HypothesisClass, grid_class

DEFAULT_TRIALS = 1000
DEFAULT_MC_SAMPLES = 100_000

SCHEMA = {
    "model": {"truth"},
    "class": {"mode", "members", "center", "radius", "points_per_axis"},
    "experiment": {"horizons", "trials", "mc_samples", "base_seed"},
    "output": {"path"},
}
_MODE_KEYS = {"explicit": {"members"}, "grid": {"center", "radius", "points_per_axis"}}


def parse_matrix(text: str) -> np.ndarray:
    rows = [r.strip() for r in text.strip().split(";")]
    try:
        data = [[float(v) for v in r.split(",")] for r in rows]
    except ValueError:
        raise ValueError(f"cannot parse matrix {text!r}") from None
    d = len(data)
    if any(len(r) != d for r in data):
        raise ValueError(f"matrix {text!r} is not square")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"matrix {text!r} has non-finite entries")
    return arr


def format_matrix(A) -> str:
    A = np.atleast_2d(A)
    return ";".join(",".join(format(float(v), ".17g") for v in row) for row in A)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    truth: np.ndarray
    class_mode: str
    horizons: tuple
    members: tuple = ()
    center: np.ndarray | None = None
    radius: float | None = None
    points_per_axis: int | None = None
    trials: int = DEFAULT_TRIALS
    mc_samples: int = DEFAULT_MC_SAMPLES
    base_seed: int = 0
    output_path: str | None = None

    def build_class(self) -> HypothesisClass:
        if self.class_mode == "grid":
            hclass = grid_class(self.center, self.radius, self.points_per_axis)
        else:
            hclass = HypothesisClass.from_members(self.members)
        return hclass.with_truth(self.truth)


def _int(value, key, errors, minimum, maximum=None):
    try:
        out = int(value)
    except ValueError:
        errors.append(f"{key} must be an integer, got {value!r}")
        return None
    if out < minimum or (maximum is not None and out > maximum):
        errors.append(f"{key} out of range: {out}")
        return None
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document.

    Raises :class:`ConfigError` carrying every problem found.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}".splitlines()[0]]) from None

    errors = []
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
            else:
                values[f"{section}.{key}"] = value.strip()

    def matrix(key):
        try:
            return parse_matrix(values[key])
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
            return None

    truth = None
    if "model.truth" not in values:
        errors.append("missing required key model.truth")
    else:
        truth = matrix("model.truth")

    mode = values.get("class.mode")
    members, center, radius, k = (), None, None, None
    if mode is None:
        errors.append("missing required key class.mode")
    elif mode not in _MODE_KEYS:
        errors.append(f"class.mode must be 'explicit' or 'grid', got {mode!r}")
    else:
        for other, keys in _MODE_KEYS.items():
            for key in sorted(keys):
                present = f"class.{key}" in values
                if other == mode and not present:
                    errors.append(f"missing required key class.{key} for class.mode = {mode}")
                elif other != mode and present:
                    errors.append(f"class.{key} is not used when class.mode = {mode}")
        if mode == "explicit" and "class.members" in values:
            parsed = []
            for j, item in enumerate(values["class.members"].split("|")):
                try:
                    parsed.append(parse_matrix(item))
                except ValueError as exc:
                    errors.append(f"class.members[{j}]: {exc}")
            members = tuple(parsed)
            if truth is not None:
                for j, A in enumerate(members):
                    if A.shape != truth.shape:
                        errors.append(
                            f"dimension mismatch: model.truth is {truth.shape[0]}x{truth.shape[0]} "
                            f"but class.members[{j}] is {A.shape[0]}x{A.shape[0]}")
        if mode == "grid":
            if "class.center" in values:
                center = matrix("class.center")
                if center is not None and truth is not None and center.shape != truth.shape:
                    errors.append(
                        f"dimension mismatch: model.truth is {truth.shape[0]}x{truth.shape[0]} "
                        f"but class.center is {center.shape[0]}x{center.shape[0]}")
            if "class.radius" in values:
                try:
                    radius = float(values["class.radius"])
                    if not radius > 0 or not np.isfinite(radius):
                        raise ValueError
                except ValueError:
                    errors.append(f"class.radius must be a positive number, got {values['class.radius']!r}")
                    radius = None
            if "class.points_per_axis" in values:
                k = _int(values["class.points_per_axis"], "class.points_per_axis", errors, 1)

    horizons = ()
    if "experiment.horizons" not in values:
        errors.append("missing required key experiment.horizons")
    else:
        try:
            horizons = tuple(int(h) for h in values["experiment.horizons"].split(","))
        except ValueError:
            errors.append(f"experiment.horizons must be a comma-separated list of integers")
        else:
            if any(h < 1 for h in horizons):
                errors.append("horizons must be positive")
            if any(b <= a for a, b in zip(horizons, horizons[1:])):
                errors.append("horizons must be strictly ascending")

    trials = _int(values.get("experiment.trials", DEFAULT_TRIALS), "experiment.trials", errors, 1)
    mc = _int(values.get("experiment.mc_samples", DEFAULT_MC_SAMPLES), "experiment.mc_samples", errors, 2)
    seed = _int(values.get("experiment.base_seed", 0), "experiment.base_seed", errors, 0, 2**64 - 1)

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        truth=truth,
        class_mode=mode,
        horizons=horizons,
        members=members,
        center=center,
        radius=radius,
        points_per_axis=k,
        trials=trials,
        mc_samples=mc,
        base_seed=seed,
        output_path=values.get("output.path") or None,
    )
