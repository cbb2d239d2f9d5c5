"""Run configuration: TOML-style files, validation, overrides.

A config has nested sections [grid], [kernel], [integrator], [initial_data],
[diagnostics], [blowup], [output].  Parsing fails fast with a field-path
message; serialize(parse(text)) parses back to an identical config.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .generators import GENERATORS
from .grid import PhaseGrid
from .integrator import IntegratorConfig
from .kernels import KernelSpec


class ConfigError(ValueError):
    """Invalid or missing configuration field; message carries the path."""


@dataclass
class RunConfig:
    grid: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    initial_data: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    blowup: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    SECTIONS = ("grid", "kernel", "integrator", "initial_data",
                "diagnostics", "blowup", "output")

    # -- access helpers ---------------------------------------------------------

    def build_grid(self) -> PhaseGrid:
        g = self.grid
        try:
            return PhaseGrid(
                d=int(_req(g, "d", "grid")),
                Lx=float(_req(g, "Lx", "grid")),
                Lv=float(_req(g, "Lv", "grid")),
                nx=int(_req(g, "nx", "grid")),
                nv=int(_req(g, "nv", "grid")),
            )
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None

    def build_kernel(self) -> KernelSpec:
        k = self.kernel
        form = _req(k, "form", "kernel")
        eps = k.get("mollify_eps")
        try:
            if form == "multiplier":
                return KernelSpec.multiplier(
                    float(_req(k, "kappa", "kernel")),
                    float(_req(k, "beta", "kernel")),
                    mollify_eps=eps,
                )
            if form == "kernel_sum":
                terms = _req(k, "terms", "kernel")
                return KernelSpec.kernel_sum(
                    [(float(t[0]), float(t[1])) for t in terms], mollify_eps=eps
                )
        except (ValueError, TypeError, IndexError) as exc:
            raise ConfigError(f"kernel: {exc}") from None
        raise ConfigError(f"kernel.form: must be 'multiplier' or 'kernel_sum', got {form!r}")

    def build_integrator(self) -> IntegratorConfig:
        i = dict(self.integrator)
        diag = self.diagnostics
        try:
            return IntegratorConfig(
                dt=float(_req(i, "dt", "integrator")),
                t_end=float(_req(i, "t_end", "integrator")),
                sigma=float(i.get("sigma", 0.0)),
                splitting=i.get("splitting", "strang"),
                fp_scheme=i.get("fp_scheme", "exact_ou"),
                cfl_guard=float(i.get("cfl_guard", 1.0)),
                diag_interval=int(diag.get("interval", 1)),
                halt_density_factor=float(i.get("halt_density_factor", 1e3)),
                neg_tol=float(i.get("neg_tol", 1e-12)),
                sobolev_orders=tuple(
                    (float(s), int(N)) for s, N in diag.get("sobolev", [])
                ),
                with_decay=bool(diag.get("decay_check", False)),
            )
        except ValueError as exc:
            raise ConfigError(f"integrator: {exc}") from None

    def validate(self) -> None:
        kernel = self.build_kernel()
        full_grid = all(k in self.grid for k in ("d", "Lx", "Lv", "nx", "nv"))
        if self.integrator or full_grid:
            # evolution configs need the whole grid; check-blowup configs may
            # carry only grid.d for the closed-form path
            grid = self.build_grid()
            try:
                kernel.validate_for_dim(grid.d)
            except ValueError as exc:
                raise ConfigError(f"kernel: {exc}") from None
        if self.integrator:
            self.build_integrator()
        gen = self.initial_data.get("generator")
        if gen is None:
            raise ConfigError("initial_data.generator: missing")
        if gen not in GENERATORS:
            raise ConfigError(
                f"initial_data.generator: unknown generator {gen!r}"
            )

    def generator_params(self) -> tuple[str, dict]:
        params = {
            k: v for k, v in self.initial_data.items() if k != "generator"
        }
        return self.initial_data["generator"], params


def _req(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}: missing")
    return section[key]


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    unknown = set(data) - set(RunConfig.SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return RunConfig(**{k: data.get(k, {}) for k in RunConfig.SECTIONS})


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value of type {type(v).__name__}")


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for section in RunConfig.SECTIONS:
        body = getattr(cfg, section)
        if not body:
            continue
        scalars = {k: v for k, v in body.items() if not isinstance(v, dict)}
        subs = {k: v for k, v in body.items() if isinstance(v, dict)}
        lines.append(f"[{section}]")
        for key in sorted(scalars):
            lines.append(f"{key} = {_toml_value(scalars[key])}")
        for key in sorted(subs):
            lines.append(f"[{section}.{key}]")
            for k2 in sorted(subs[key]):
                lines.append(f"{k2} = {_toml_value(subs[key][k2])}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def apply_override(cfg: RunConfig, dotted: str) -> RunConfig:
    """Apply one --override key=value with a dotted section path."""
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} must look like section.key=value")
    path, raw = dotted.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2 or parts[0] not in RunConfig.SECTIONS:
        raise ConfigError(f"override path {path!r} must be section.key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    getattr(cfg, parts[0])[parts[1]] = value
    return cfg
