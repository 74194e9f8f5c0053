"""Run configuration: ``[section]`` / ``key = value`` files."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import FieldModel, MaterialParams, StrayFieldBackend
from .mesh import Mesh, MeshError, build_box_mesh, load_mesh_native
from .scheme import SchemeConfig, validate_config


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


# section -> allowed keys
SCHEMA = {
    "mesh": {"kind", "nx", "ny", "nz", "lx", "ly", "lz", "path"},
    "material": {"alpha", "d2", "Q", "e", "h_ext"},
    "scheme": {"variant", "theta", "tau", "T", "rho", "M", "krylov_tol", "krylov_maxiter",
               "coupling", "c_regime", "energy_budget", "strict"},
    "stray": {"mode", "padding", "tol"},
    "initial": {"kind", "m", "seed", "path"},
    "output": {"csv", "vtk_dir", "stride"},
    "macrospin": {"tol"},
    "convergence": {"taus", "reference", "norm", "min_order", "max_order"},
    "demag": {"tol"},
}


@dataclass
class MeshSpec:
    kind: str = "box"
    shape: tuple[int, int, int] = (4, 4, 4)
    lengths: tuple[float, float, float] = (1.0, 1.0, 1.0)
    path: Path | None = None

    def build(self) -> Mesh:
        if self.kind == "box":
            return build_box_mesh(*self.shape, lengths=self.lengths)
        return load_mesh_native(self.path)


@dataclass
class InitialCondition:
    kind: str = "uniform"  # uniform | random | file
    m: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    seed: int = 0
    path: Path | None = None

    def build(self, mesh: Mesh) -> np.ndarray:
        if self.kind == "uniform":
            m = np.tile(self.m / np.linalg.norm(self.m), (mesh.num_vertices, 1))
        elif self.kind == "random":
            rng = np.random.default_rng(np.uint64(self.seed))
            m = rng.normal(size=(mesh.num_vertices, 3))
        else:
            m = np.loadtxt(self.path, ndmin=2)
            if m.shape != (mesh.num_vertices, 3):
                raise ConfigError([f"initial file {self.path}: expected ({mesh.num_vertices}, 3) values, got {m.shape}"])
        n = np.linalg.norm(m, axis=1, keepdims=True)
        if np.any(n == 0):
            raise ConfigError(["initial condition has zero vectors; cannot normalize"])
        return m / n


@dataclass
class OutputSpec:
    csv: Path | None = None
    vtk_dir: Path | None = None
    stride: int = 10


@dataclass
class RunConfig:
    mesh: MeshSpec
    material: MaterialParams
    scheme: SchemeConfig
    stray: StrayFieldBackend
    initial: InitialCondition
    output: OutputSpec
    strict: bool = False
    checks: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    source: Path | None = None

    def build_model(self, mesh: Mesh | None = None) -> FieldModel:
        return FieldModel(mesh or self.mesh.build(), self.material, self.stray)


def _vec(s: str) -> np.ndarray:
    parts = [p for p in s.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {s!r}")
    return np.array([float(p) for p in parts])


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def parse_config(path, strict: bool | None = None) -> RunConfig:
    """Parse and fully validate a run configuration file.

    Unknown sections or keys are errors. All problems are collected and raised
    together as a :class:`ConfigError`. Order-2 parameter choices outside the
    convergent regimes are warnings unless ``strict`` (argument or
    ``[scheme] strict``) is set.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config_string(text, base=path.parent, strict=strict, source=path)


def parse_config_string(text: str, base=".", strict: bool | None = None, source=None) -> RunConfig:
    base = Path(base)
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source or "<config>"))
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}".replace("\n", " ")]) from None

    errors: list[str] = []
    for sec in cp.sections():
        if sec not in SCHEMA:
            errors.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                errors.append(f"unknown key '{key}' in [{sec}]")

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            errors.append(f"[{sec}] {key} = {raw!r}: {exc}")
            return default

    def path_of(s):
        p = Path(s)
        return p if p.is_absolute() else base / p

    # mesh
    kind = get("mesh", "kind", str, "box")
    mesh = MeshSpec(kind=kind)
    if kind == "box":
        mesh.shape = tuple(get("mesh", k, int, 4) for k in ("nx", "ny", "nz"))
        mesh.lengths = tuple(get("mesh", k, float, 1.0) for k in ("lx", "ly", "lz"))
        if min(mesh.shape) < 1:
            errors.append(f"[mesh] cell counts must be >= 1, got {mesh.shape}")
        if min(mesh.lengths) <= 0:
            errors.append(f"[mesh] lengths must be > 0, got {mesh.lengths}")
    elif kind == "file":
        p = get("mesh", "path", path_of, None)
        if p is None:
            errors.append("[mesh] kind = file requires path")
        elif not p.is_file():
            errors.append(f"[mesh] path {p} is not a readable file")
        mesh.path = p
    else:
        errors.append(f"[mesh] kind must be 'box' or 'file', got {kind!r}")

    # material
    material = None
    if not cp.has_option("material", "alpha"):
        errors.append("[material] alpha is required")
    else:
        try:
            material = MaterialParams(
                alpha=get("material", "alpha", float, 1.0),
                d2=get("material", "d2", float, 0.0),
                Q=get("material", "Q", float, 0.0),
                e_axis=get("material", "e", _vec, np.array([0.0, 0.0, 1.0])),
                H_ext=get("material", "h_ext", _vec, np.zeros(3)),
            )
        except ValueError as exc:
            errors.append(f"[material] {exc}")

    # scheme
    scheme = None
    variant = get("scheme", "variant", str, "order2")
    rho_raw = get("scheme", "rho", str, "tau_log_tau")
    M_raw = get("scheme", "M", str, "inv_sqrt_tau")
    kw = dict(
        variant=variant,
        tau=get("scheme", "tau", float, 1e-3),
        T_final=get("scheme", "T", float, 0.0),
        theta=get("scheme", "theta", float, 0.5),
        krylov_tol=get("scheme", "krylov_tol", float, 1e-10),
        krylov_maxiter=get("scheme", "krylov_maxiter", int, 500),
        coupling=get("scheme", "coupling", str, "full"),
        c_regime=get("scheme", "c_regime", float, 1.0),
        energy_budget=get("scheme", "energy_budget", float, 0.0),
    )
    if rho_raw in ("zero", "tau_log_tau"):
        kw["rho_mode"] = rho_raw
    else:
        try:
            kw.update(rho_mode="constant", rho_value=float(rho_raw))
        except ValueError:
            errors.append(f"[scheme] rho must be 'zero', 'tau_log_tau' or a number, got {rho_raw!r}")
    if M_raw == "inv_sqrt_tau":
        kw["M_mode"] = "inv_sqrt_tau"
    else:
        try:
            kw.update(M_mode="fixed", M_value=float(M_raw))
        except ValueError:
            errors.append(f"[scheme] M must be 'inv_sqrt_tau' or a number, got {M_raw!r}")
    try:
        scheme = SchemeConfig(**kw)
    except ValueError as exc:
        errors.append(f"[scheme] {exc}")
    if strict is None:
        strict = get("scheme", "strict", _bool, False)

    # stray
    stray = None
    try:
        stray = StrayFieldBackend(
            mode=get("stray", "mode", str, "none"),
            padding_factor=get("stray", "padding", float, 4.0),
            tolerance=get("stray", "tol", float, 1e-10),
        )
    except ValueError as exc:
        errors.append(f"[stray] {exc}")
    if stray is not None and stray.mode == "truncated_fem" and kind != "box":
        errors.append("[stray] truncated_fem requires a box mesh")

    # initial condition
    ikind = get("initial", "kind", str, "uniform")
    initial = InitialCondition(kind=ikind)
    if ikind == "uniform":
        initial.m = get("initial", "m", _vec, np.array([1.0, 0.0, 0.0]))
        if not np.linalg.norm(initial.m) > 0:
            errors.append("[initial] m must be non-zero")
    elif ikind == "random":
        seed = get("initial", "seed", int, 0)
        if not 0 <= seed < 2**64:
            errors.append(f"[initial] seed must be a 64-bit unsigned integer, got {seed}")
        initial.seed = seed
    elif ikind == "file":
        initial.path = get("initial", "path", path_of, None)
        if initial.path is None or not initial.path.is_file():
            errors.append(f"[initial] file {initial.path} is not readable")
    else:
        errors.append(f"[initial] kind must be uniform, random or file, got {ikind!r}")

    output = OutputSpec(
        csv=get("output", "csv", path_of, None),
        vtk_dir=get("output", "vtk_dir", path_of, None),
        stride=get("output", "stride", int, 10),
    )
    if output.stride < 1:
        errors.append(f"[output] stride must be >= 1, got {output.stride}")
    if output.csv is not None and not output.csv.parent.exists():
        errors.append(f"[output] csv directory {output.csv.parent} does not exist")

    checks = {
        "macrospin_tol": get("macrospin", "tol", float, 5e-3),
        "taus": get("convergence", "taus", lambda s: [float(x) for x in s.replace(",", " ").split()], None),
        "reference": get("convergence", "reference", str, "analytic"),
        "norm": get("convergence", "norm", str, "max"),
        "min_order": get("convergence", "min_order", float, None),
        "max_order": get("convergence", "max_order", float, None),
        "demag_tol": get("demag", "tol", float, 0.1),
    }
    if checks["reference"] not in ("analytic", "richardson"):
        errors.append(f"[convergence] reference must be analytic or richardson, got {checks['reference']!r}")
    if checks["norm"] not in ("max", "l2"):
        errors.append(f"[convergence] norm must be max or l2, got {checks['norm']!r}")

    warnings: list[str] = []
    if not errors and scheme is not None and scheme.variant == "order2":
        h = None
        if mesh.kind == "box":
            h = float(np.linalg.norm(np.asarray(mesh.lengths) / np.asarray(mesh.shape)))
        else:
            try:
                h = mesh.build().h
            except (MeshError, OSError) as exc:
                errors.append(f"[mesh] {exc}")
        if not errors:
            check = validate_config(scheme, h=h)
            if strict:
                errors.extend(f"[scheme] {v}" for v in check.violations)
            else:
                warnings.extend(check.violations)
            warnings.extend(check.warnings)

    if errors:
        raise ConfigError(errors)
    return RunConfig(mesh, material, scheme, stray, initial, output, strict, checks, warnings, source)
