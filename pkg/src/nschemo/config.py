"""INI-style run configuration: parsing, validation and effective-config emission.

Sections: [grid], [physics], [potential], [source], [initial], [stepper],
[output], [experiment].  Every key is optional; omitted keys take the
defaults listed in SCHEMA.  Hypothesis violations raise ConfigError with
the hypothesis tag in the message.
"""
from __future__ import annotations

import configparser
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, MacVelocity
from .potential import Potential
from .stepper import ConfigError, PhysParams, SimState, SourceSpec, StepperConfig, default_dt, make_state

OUT_ENV = "NSCHEMO_OUT"
DEFAULT_OUT = "nschemo_out"


class ConfigSyntaxError(ConfigError):
    def __init__(self, msg, line=None, column=None):
        super().__init__(msg)
        self.line = line
        self.column = column


class UnknownKeyError(ConfigError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    v = s.strip().lower()
    return None if v in ("", "none") else float(s)


def _floats(s):
    return tuple(float(p) for p in s.replace(",", " ").split())


def _words(s):
    return tuple(p for p in s.replace(",", " ").split())


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA = {
    "grid": {"nx": (int, 64), "ny": (int, 64), "lx": (float, 1.0), "ly": (float, 1.0)},
    "physics": {
        "A": (float, 1.0),
        "B": (float, 1e-3),
        "chi": (float, 0.0),
        "lambda": (_opt_float, None),
        "alpha": (float, 0.0),
        "c0": (float, 0.0),
        "consumption": (float, 0.0),
        "eta1": (float, 1.0),
        "eta2": (float, 1.0),
        "h_kind": (str, "linear"),
    },
    "potential": {
        "kind": (str, "logarithmic"),
        "theta": (float, 0.8),
        "theta0": (float, 1.0),
        "eps_barrier": (float, 1e-12),
    },
    "source": {
        "kind": (str, "zero"),
        "value": (float, 0.0),
        "amplitude": (float, 0.0),
        "center": (_floats, (0.5, 0.5)),
        "width": (float, 0.1),
        "decay": (float, 0.0),
        "times": (_floats, ()),
        "values": (_floats, ()),
    },
    "initial": {
        "phi": (str, "spinodal"),
        "mean": (float, 0.0),
        "amplitude": (float, 0.05),
        "width": (float, 0.05),
        "stripe_half_width": (float, 0.25),
        "phi_file": (str, ""),
        "sigma": (float, 0.0),
        "sigma_noise": (float, 0.0),
        "sigma_file": (str, ""),
        "velocity": (str, "zero"),
        "velocity_amplitude": (float, 0.0),
        "seed": (int, 0),
    },
    "stepper": {
        "dt": (_opt_float, None),
        "t_end": (_opt_float, None),
        "n_steps": (int, 100),
        "cfl_max": (float, 0.5),
        "adapt_dt": (_bool, False),
        "dt_min": (float, 1e-10),
        "newton_tol": (float, 1e-10),
        "newton_max": (int, 30),
        "projection_tol": (float, 1e-9),
        "linear_tol": (float, 1e-12),
        "coupling": (str, "sequential"),
        "picard_kmax": (int, 1),
        "picard_tol": (float, 1e-10),
        "upwind": (_bool, False),
        "nutrient": (_bool, True),
    },
    "output": {
        "directory": (str, ""),
        "cadence": (int, 0),
        "formats": (_words, ("binary", "ppm")),
        "diagnostics": (str, "diagnostics.csv"),
    },
    "experiment": {"name": (str, ""), "seed": (int, 0)},
}

PHI_PRESETS = ("constant", "spinodal", "stripe", "snapshot")
FORMATS = ("binary", "ascii", "ppm", "csv")


@dataclass
class RunConfig:
    values: dict
    grid: Grid
    params: PhysParams
    stepper: StepperConfig
    source_path: str = "<string>"
    warnings: list = field(default_factory=list)

    def get(self, section, key):
        return self.values[section][key]

    @property
    def seed(self) -> int:
        return self.values["initial"]["seed"]

    @property
    def n_steps(self):
        return None if self.values["stepper"]["t_end"] is not None else self.values["stepper"]["n_steps"]

    @property
    def t_end(self):
        return self.values["stepper"]["t_end"]

    @property
    def output_dir(self) -> Path:
        d = self.values["output"]["directory"]
        return Path(d or os.environ.get(OUT_ENV, DEFAULT_OUT))

    def with_seed(self, seed: int) -> "RunConfig":
        return parse_string(emit_config(self, overrides={("initial", "seed"): int(seed)}), self.source_path)

    def initial_state(self) -> SimState:
        return build_initial_state(self)


def _syntax_error(exc, text, source):
    line = getattr(exc, "lineno", None)
    if line is None and getattr(exc, "errors", None):
        line = exc.errors[0][0]
    col = None
    if line is not None:
        lines = text.splitlines()
        if 0 < line <= len(lines):
            raw = lines[line - 1]
            col = len(raw) - len(raw.lstrip()) + 1
    where = f"{source}:{line}:{col}" if line is not None else source
    first = str(exc).splitlines()[0]
    return ConfigSyntaxError(f"{where}: syntax error: {first}", line, col)


def parse_string(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str  # keys are case sensitive (A, B)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise _syntax_error(exc, text, source) from exc

    values = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise UnknownKeyError(f"{source}: unknown section [{sec}]")
    for sec, keys in SCHEMA.items():
        got = cp[sec] if cp.has_section(sec) else {}
        for k in got:
            if k not in keys:
                raise UnknownKeyError(f"{source}: unknown key '{k}' in [{sec}]")
        vals = {}
        for k, (conv, default) in keys.items():
            if k in got:
                try:
                    vals[k] = conv(got[k])
                except ValueError as exc:
                    raise ConfigError(f"{source}: bad value for [{sec}] {k}: {exc}") from exc
            else:
                vals[k] = default
        values[sec] = vals
    return _validate(values, source)


def parse_and_validate(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_string(text, str(path))


def _validate(values: dict, source: str) -> RunConfig:
    g, ph, po, so, ini, st, out = (values[s] for s in ("grid", "physics", "potential", "source", "initial", "stepper", "output"))
    try:
        grid = Grid(g["nx"], g["ny"], g["lx"], g["ly"])
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from exc
    caught = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        try:
            if po["kind"] == "quartic":
                if po["theta0"] != 1.0:
                    raise ConfigError("(H2) quartic potential uses theta0 = 1")
                pot = Potential(kind="quartic", theta=0.0, theta0=1.0, eps_barrier=po["eps_barrier"])
            else:
                pot = Potential(po["kind"], po["theta"], po["theta0"], po["eps_barrier"])
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"(H2) {exc}") from exc
        caught.extend(str(w.message) for w in wlist)

    if so["kind"] == "tabulated":
        source = SourceSpec(kind="tabulated", times=np.array(so["times"]), table=np.array(so["values"]))
    else:
        if so["kind"] == "custom":
            raise ConfigError("(H4) custom sources cannot be set from a config file")
        if len(so["center"]) != 2:
            raise ConfigError("[source] center needs two numbers")
        source = SourceSpec(
            kind=so["kind"], value=so["value"], amplitude=so["amplitude"],
            center=tuple(so["center"]), width=so["width"], decay=so["decay"],
        )
    params = PhysParams(
        A=ph["A"], B=ph["B"], chi=ph["chi"], lam=ph["lambda"], alpha=ph["alpha"], c0=ph["c0"],
        consumption=ph["consumption"], eta1=ph["eta1"], eta2=ph["eta2"], potential=pot,
        h_kind=ph["h_kind"], source=source,
    )
    if params.lambda_variant and params.lam * params.chi < 0:
        caught.append("lambda * chi < 0: the nutrient part of the dissipation is indefinite")

    dt = st["dt"] if st["dt"] is not None else default_dt(grid, params)
    if st["t_end"] is not None and st["t_end"] <= 0:
        raise ConfigError("[stepper] t_end must be positive")
    if st["n_steps"] < 0:
        raise ConfigError("[stepper] n_steps must be non-negative")
    cfg = StepperConfig(
        dt=dt, cfl_max=st["cfl_max"], adapt_dt=st["adapt_dt"], dt_min=st["dt_min"],
        newton_tol=st["newton_tol"], newton_max=st["newton_max"], projection_tol=st["projection_tol"],
        linear_tol=st["linear_tol"], coupling=st["coupling"], picard_kmax=st["picard_kmax"],
        picard_tol=st["picard_tol"], upwind=st["upwind"], nutrient=st["nutrient"],
    )

    preset = ini["phi"].split()
    if not preset or preset[0] not in PHI_PRESETS:
        raise ConfigError(f"[initial] phi must be one of {PHI_PRESETS}, got {ini['phi']!r}")
    if preset[0] == "constant" and len(preset) > 1:
        # shorthand "constant <value>"
        try:
            ini["mean"] = float(preset[1])
        except ValueError as exc:
            raise ConfigError(f"[initial] bad constant value {preset[1]!r}") from exc
        ini["phi"] = "constant"
    elif len(preset) > 1:
        raise ConfigError(f"[initial] unexpected arguments in phi = {ini['phi']!r}")
    if ini["phi"] == "snapshot" and not ini["phi_file"]:
        raise ConfigError("[initial] phi = snapshot needs phi_file")
    if ini["velocity"] not in ("zero", "vortex"):
        raise ConfigError("[initial] velocity must be zero or vortex")
    if out["cadence"] < 0:
        raise ConfigError("[output] cadence must be >= 0")
    for f in out["formats"]:
        if f not in FORMATS:
            raise ConfigError(f"[output] unknown format {f!r}; choose from {FORMATS}")

    rc = RunConfig(values, grid, params, cfg, source, caught)
    # builds the initial fields once so |mean phi0| < 1 is checked up front
    build_initial_state(rc)
    return rc


def _load_field(path, grid, what):
    from .fieldio import read_snapshot

    try:
        fld, _ = read_snapshot(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"[initial] cannot read {what} snapshot {path}: {exc}") from exc
    if fld.grid.shape != grid.shape:
        raise ConfigError(f"[initial] {what} snapshot has shape {fld.grid.shape}, grid is {grid.shape}")
    return np.array(fld.values)


def initial_phi(rc: RunConfig, grid: Grid | None = None) -> np.ndarray:
    ini = rc.values["initial"]
    grid = grid or rc.grid
    kind = ini["phi"]
    if kind == "constant":
        phi = np.full(grid.shape, ini["mean"])
    elif kind == "spinodal":
        rng = np.random.default_rng(ini["seed"])
        phi = ini["mean"] + ini["amplitude"] * rng.uniform(-1.0, 1.0, grid.shape)
    elif kind == "stripe":
        x, _ = grid.cell_centers()
        d = np.abs(x - 0.5 * grid.lx) - ini["stripe_half_width"] * grid.lx
        phi = ini["mean"] - ini["amplitude"] * np.tanh(d / (np.sqrt(2.0) * ini["width"]))
    else:
        phi = _load_field(ini["phi_file"], grid, "phi")
    return phi


def build_initial_state(rc: RunConfig) -> SimState:
    ini = rc.values["initial"]
    grid, params = rc.grid, rc.params
    pot = params.potential
    phi = initial_phi(rc)
    if not np.all(np.isfinite(phi)):
        raise ConfigError("[initial] phi0 has non-finite values")
    mean = float(np.mean(phi))
    if not abs(mean) < 1.0:
        raise ConfigError(f"initial data need |mean phi0| < 1 (got {mean!r})")
    if pot.singular:
        if np.max(np.abs(phi)) > 1.0:
            raise ConfigError("initial data need ||phi0||_inf <= 1 for the logarithmic potential")
        lim = 1.0 - 2.0 * pot.eps_barrier
        if np.any(np.abs(phi) > lim):
            warnings.warn("phi0 touches +-1; clamped inward by the evaluation barrier", stacklevel=2)
            phi = np.clip(phi, -lim, lim)
    if ini["sigma_file"]:
        sigma = _load_field(ini["sigma_file"], grid, "sigma")
    else:
        sigma = np.full(grid.shape, ini["sigma"])
        if ini["sigma_noise"]:
            rng = np.random.default_rng(ini["seed"] + 1)
            sigma = sigma + ini["sigma_noise"] * rng.uniform(-1.0, 1.0, grid.shape)
    if ini["velocity"] == "vortex" and ini["velocity_amplitude"]:
        a = ini["velocity_amplitude"]
        lx, ly = grid.lx, grid.ly
        v = MacVelocity.from_streamfunction(
            grid, lambda x, y: a * np.sin(np.pi * x / lx) ** 2 * np.sin(np.pi * y / ly) ** 2
        )
    else:
        v = MacVelocity.zeros(grid)
    return make_state(grid, phi, sigma, v, params, 0.0)


def emit_config(rc: RunConfig, overrides: dict | None = None) -> str:
    """Effective configuration as INI text; parsing it gives the same config."""
    overrides = overrides or {}
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for k in keys:
            v = overrides.get((sec, k), rc.values[sec][k])
            if sec == "stepper" and k == "dt" and v is None:
                v = rc.stepper.dt
            lines.append(f"{k} = {_fmt(v)}")
        lines.append("")
    return "\n".join(lines)
