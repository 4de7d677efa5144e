"""Configuration parsing, scenario presets, and the command-line interface.

Subcommands: ``simulate``, ``verify-identities``, ``legendre``,
``convergence``, ``dump-config-schema``.  Exit codes: 0 success,
1 usage or configuration error, 2 numerical-contract violation,
3 solver failure.

Config files are line oriented, ``section.key = value`` with ``#``
comments.  Unknown keys are hard errors and every block is validated
before any field is allocated.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import fields as fd
from .coupled_stepper import StepperOptions, compatibility_residual, run
from .elliptic_solver import EllipticOptions, leray_project
from .errors import ConfigError, NumericalContractError, SolverConvergenceError
from .landau_de_gennes import (MaterialParams, bulk_density, legendre_min,
                               uniaxial_critical_s, uniaxial_q)
from .manufactured import elliptic_ladder, observed_orders, stokes_ladder, stokes_exact
from .stokes_solver import StokesProblem, assemble_coefficient, solve_stokes
from .tensor_algebra import (a_hat, cancellation_check, deviatoric, frobenius,
                             norm, s_q, sigma_viscous, sym, t_tensor, trace)

CSV_HEADER = "step,t,f_bulk,f_elastic,kinetic,diss_visc,diss_rot,energy_residual,div_u_max,trQ_max"

SCENARIOS = ("stationary_check", "quench", "perturbed_critical", "manufactured_stokes", "custom")
FORMATS = ("csv", "structured_points", "binary")


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "stationary_check"
    amplitude: float = 0.01
    seed: int = 42
    director: tuple[float, float, float] = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    n_steps: int = 100
    cfl_check: bool = True
    energy_guard: float | None = None
    freeze_velocity: bool = False
    check_legendre: bool = True

    def to_options(self) -> StepperOptions:
        return StepperOptions(dt=self.dt, cfl_check=self.cfl_check,
                              energy_guard=self.energy_guard,
                              freeze_velocity=self.freeze_velocity,
                              check_legendre=self.check_legendre)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "nematoflow_out"
    snapshot_every: int = 1
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class SolverConfig:
    tol_rel: float = 1e-10
    max_iter: int | None = None
    preconditioner: str = "none"

    def to_options(self) -> EllipticOptions:
        return EllipticOptions(self.tol_rel, self.max_iter, self.preconditioner)


@dataclass(frozen=True)
class GridConfig:
    n: tuple[int, int, int] = (16, 16, 16)
    h: float | None = None  # defaults to 1/n[0] (unit box)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bc: tuple[str, str, str] = ("dirichlet", "dirichlet", "dirichlet")

    def to_grid(self) -> fd.GridSpec:
        h = self.h if self.h is not None else 1.0 / self.n[0]
        return fd.GridSpec(self.n, h, self.origin, self.bc)


@dataclass(frozen=True)
class SimConfig:
    material: MaterialParams = field(default_factory=MaterialParams)
    grid: GridConfig = field(default_factory=GridConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


# section -> key -> (type tag, default, help)
_SCHEMA = {
    "material": {
        "a": ("float", -1.0, "bulk coefficient a (any sign)"),
        "b": ("float", 1.0, "bulk coefficient b > 0"),
        "c": ("float", 1.0, "bulk coefficient c > 0"),
        "L1": ("float", 1.0, "elastic constant, L1 > 0"),
        "L2": ("float", 0.0, "elastic constant"),
        "L3": ("float", 0.0, "elastic constant, L1+L2+L3 > 0"),
        "xi": ("float", 0.0, "flow-alignment parameter"),
        "nu": ("float", 1.0, "viscosity > 0"),
        "gamma": ("float", 1.0, "rotational mobility > 0"),
    },
    "grid": {
        "n": ("int3", (16, 16, 16), "cells per axis (>= 4)"),
        "h": ("ofloat", None, "spacing; default 1/n[0]"),
        "origin": ("float3", (0.0, 0.0, 0.0), "box origin"),
        "bc": ("bc3", ("dirichlet", "dirichlet", "dirichlet"), "per-axis boundary mode"),
    },
    "scenario": {
        "name": ("scenario", "stationary_check", "preset name"),
        "amplitude": ("float", 0.01, "perturbation / seed amplitude"),
        "seed": ("int", 42, "PRNG seed"),
        "director": ("float3", (0.0, 0.0, 1.0), "anchoring director"),
    },
    "stepper": {
        "dt": ("float", 1e-3, "time step > 0"),
        "n_steps": ("int", 100, "number of steps"),
        "cfl_check": ("bool", True, "abort when |u| dt / h > 0.5"),
        "energy_guard": ("ofloat", None, "abort threshold on relative energy increase"),
        "freeze_velocity": ("bool", False, "hold the velocity fixed (orientation relaxation only)"),
        "check_legendre": ("bool", True, "verify nodewise ellipticity of the viscosity coefficient"),
    },
    "solver": {
        "tol_rel": ("float", 1e-10, "relative residual tolerance"),
        "max_iter": ("oint", None, "iteration budget; default 10x unknowns"),
        "preconditioner": ("precond", "none", "none | jacobi-L1-laplacian"),
    },
    "output": {
        "dir": ("str", "nematoflow_out", "output directory"),
        "snapshot_every": ("int", 1, "CSV/snapshot cadence in steps"),
        "formats": ("formats", ("csv",), "any of: csv structured_points binary"),
    },
}


def _parse_value(tag: str, raw: str, where: str):
    toks = raw.split()
    try:
        if tag == "float":
            return float(raw)
        if tag == "ofloat":
            return None if raw.strip().lower() == "none" else float(raw)
        if tag == "int":
            return int(raw)
        if tag == "oint":
            return None if raw.strip().lower() == "none" else int(raw)
        if tag == "bool":
            val = raw.strip().lower()
            if val in ("true", "1", "yes"):
                return True
            if val in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if tag == "str":
            return raw.strip()
        if tag == "int3":
            if len(toks) != 3:
                raise ValueError("expected three integers")
            return tuple(int(t) for t in toks)
        if tag == "float3":
            if len(toks) != 3:
                raise ValueError("expected three numbers")
            return tuple(float(t) for t in toks)
        if tag == "bc3":
            if len(toks) != 3 or any(t not in (fd.DIRICHLET, fd.PERIODIC) for t in toks):
                raise ValueError("expected three of: dirichlet periodic")
            return tuple(toks)
        if tag == "scenario":
            val = raw.strip()
            if val not in SCENARIOS:
                raise ValueError(f"unknown scenario {val!r}; choose from {', '.join(SCENARIOS)}")
            return val
        if tag == "precond":
            val = raw.strip()
            if val not in ("none", "jacobi-L1-laplacian"):
                raise ValueError(f"unknown preconditioner {val!r}")
            return val
        if tag == "formats":
            if not toks or any(t not in FORMATS for t in toks):
                raise ValueError(f"formats must be from: {' '.join(FORMATS)}")
            return tuple(toks)
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from None
    raise ConfigError(f"{where}: unhandled value type {tag}")


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    """Parse and fully validate a config; errors name file, line, and key."""
    values: dict[str, dict] = {section: {} for section in _SCHEMA}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {line.strip()!r}")
        key_part, raw = stripped.split("=", 1)
        key_part = key_part.strip()
        if "." not in key_part:
            raise ConfigError(f"{source}:{lineno}: key {key_part!r} must be 'section.key'")
        section, key = key_part.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key {key_part!r}")
        if key in values[section]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key_part!r}")
        tag = _SCHEMA[section][key][0]
        values[section][key] = _parse_value(tag, raw.strip(), f"{source}:{lineno}: {key_part}")

    def block(section, cls):
        try:
            return cls(**values[section])
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{source}: [{section}] {err}") from None

    cfg = SimConfig(
        material=block("material", MaterialParams),
        grid=block("grid", GridConfig),
        scenario=block("scenario", ScenarioConfig),
        stepper=block("stepper", StepperConfig),
        solver=block("solver", SolverConfig),
        output=block("output", OutputConfig),
    )
    # fail fast: every block must construct its runtime object cleanly
    try:
        cfg.grid.to_grid()
        cfg.stepper.to_options()
        cfg.solver.to_options()
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from None
    return cfg


def serialize_config(cfg: SimConfig) -> str:
    """Emit every key (defaults materialized); parse(serialize(cfg)) == cfg."""
    blocks = {
        "material": cfg.material, "grid": cfg.grid, "scenario": cfg.scenario,
        "stepper": cfg.stepper, "solver": cfg.solver, "output": cfg.output,
    }
    lines = ["# nematoflow configuration"]
    for section, keys in _SCHEMA.items():
        obj = blocks[section]
        for key in keys:
            lines.append(f"{section}.{key} = {_fmt(getattr(obj, key))}")
    return "\n".join(lines) + "\n"


def dump_config_schema() -> str:
    lines = ["# nematoflow configuration schema: section.key = value, '#' comments", "#"]
    for section, keys in _SCHEMA.items():
        for key, (tag, default, help_text) in keys.items():
            lines.append(f"{section}.{key} = {_fmt(default)}  # ({tag}) {help_text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# scenario presets

def _lowest_energy_critical_s(p: MaterialParams) -> float:
    candidates = uniaxial_critical_s(p)
    energies = [float(bulk_density(p, uniaxial_q(s))) for s in candidates]
    return candidates[int(np.argmin(energies))]


def _bump(t: np.ndarray) -> np.ndarray:
    """C^3 bump supported on [0.25, 0.75], unit peak."""
    out = np.zeros_like(t)
    inside = (t > 0.25) & (t < 0.75)
    out[inside] = np.sin(2.0 * np.pi * (t[inside] - 0.25)) ** 4
    return out


def build_scenario(cfg: SimConfig):
    """Initial fields and anchoring for a preset.

    Returns (grid, u0, q0, bc).  The quench preset starts isotropic in
    the interior with uniaxial anchoring; perturbed_critical adds a
    compactly supported orientation perturbation on top of the
    lowest-energy uniaxial state.
    """
    grid = cfg.grid.to_grid()
    p = cfg.material
    name = cfg.scenario.name
    rng = np.random.default_rng(np.random.SeedSequence(cfg.scenario.seed))
    u0 = grid.zeros((3,))
    director = cfg.scenario.director

    if name in ("stationary_check", "perturbed_critical", "quench"):
        s_star = _lowest_energy_critical_s(p)
        if name != "quench" and abs(s_star) < 1e-12:
            raise ConfigError(
                f"scenario {name!r} needs a nonzero uniaxial critical point; "
                "the bulk coefficients admit only the isotropic state")
        q_anchor = uniaxial_q(s_star, director)
        bc = fd.BoundaryData.constant(grid, q_anchor)
        if name == "quench":
            q0 = grid.zeros((3, 3))
            bc.apply_q(grid, q0)
        elif name == "stationary_check":
            q0 = np.broadcast_to(q_anchor, grid.shape((3, 3))).copy()
        else:
            x, y, z = grid.meshgrid()
            ex = grid.extent
            chi = (_bump(x / ex[0]) * _bump(y / ex[1]) * _bump(z / ex[2]))
            direction = deviatoric(sym(rng.standard_normal((3, 3))))
            direction /= max(float(norm(direction)), 1e-30)
            q0 = q_anchor + cfg.scenario.amplitude * chi[..., None, None] * direction
            bc.apply_q(grid, q0)
        return grid, u0, q0, bc

    if name == "custom":
        bc = fd.BoundaryData(grid.zeros((3, 3)))
        return grid, u0, grid.zeros((3, 3)), bc

    raise ConfigError(f"scenario {name!r} is not a time-stepping preset")


# ---------------------------------------------------------------------------
# identity suites

def _sample_q(rng, n):
    return deviatoric(sym(rng.uniform(-1.0, 1.0, size=(n, 3, 3))))


def verify_identities(seed: int, n_samples: int, _canary_sign_flip: bool = False) -> dict[str, float]:
    """Randomized worst-case deviations for the pointwise tensor identities.

    Keys map identity name -> worst deviation over n_samples draws.  The
    hidden canary flag flips one sign in the cancellation evaluation and
    exists so the build can prove the suite actually detects breakage.
    """
    if n_samples <= 0:
        return {}
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    q = _sample_q(rng, n_samples)
    m = rng.uniform(-1.0, 1.0, size=(n_samples, 3, 3))
    pmat = rng.uniform(-1.0, 1.0, size=(n_samples, 3, 3))
    xi = rng.uniform(-1.5, 1.5, size=n_samples)

    s = s_q(xi, q, m)
    out = {}
    out["s_q_symmetry"] = float(np.max(np.abs(s - np.swapaxes(s, -1, -2))))
    out["s_q_trace"] = float(np.max(np.abs(trace(s))))
    out["self_adjointness"] = float(np.max(np.abs(
        frobenius(s, pmat) - frobenius(s_q(xi, q, pmat), m))))

    msym = deviatoric(sym(m))
    sgn = -1.0 if _canary_sign_flip else 1.0
    lhs = frobenius(-s_q(xi, q, msym) + sgn * (q @ msym - msym @ q), pmat)
    ssym, sant = sym(pmat), 0.5 * (pmat - np.swapaxes(pmat, -1, -2))
    rhs = frobenius(-s_q(xi, q, ssym) + q @ sant - sant @ q, msym)
    out["cancellation"] = float(np.max(np.abs(lhs - rhs)))

    gu = rng.uniform(-1.0, 1.0, size=(n_samples, 3, 3))
    gv = rng.uniform(-1.0, 1.0, size=(n_samples, 3, 3))
    lhs_v = frobenius(sigma_viscous(xi, q, gu), gv)
    rhs_v = frobenius(t_tensor(xi, q, gu), t_tensor(xi, q, gv))
    out["viscous_contraction"] = float(np.max(np.abs(lhs_v - rhs_v)))

    n_eig = min(n_samples, 256)
    ah = a_hat(xi[:n_eig], q[:n_eig])
    m9 = np.moveaxis(ah, (-4, -3, -2, -1), (-4, -2, -3, -1)).reshape(n_eig, 9, 9)
    eigs = np.linalg.eigvalsh(0.5 * (m9 + np.swapaxes(m9, -1, -2)))
    out["a_hat_psd_min"] = float(np.min(eigs))
    return out


IDENTITY_LIMITS = {
    "s_q_symmetry": 1e-14,
    "s_q_trace": 1e-14,
    "self_adjointness": 1e-12,
    "cancellation": 1e-12,
    "viscous_contraction": 1e-12,
}


def identities_pass(report: dict[str, float]) -> bool:
    ok = all(report.get(k, 0.0) <= v for k, v in IDENTITY_LIMITS.items())
    return ok and report.get("a_hat_psd_min", 0.0) >= -1e-12


# ---------------------------------------------------------------------------
# commands

def _echo(args, *msg):
    if not args.quiet:
        print(*msg)


def cmd_verify_identities(args) -> int:
    report = verify_identities(args.seed, args.samples)
    for key, val in report.items():
        _echo(args, f"{key}: {val!r}")
    if not report:
        _echo(args, "no samples requested; vacuous pass")
        return 0
    if not identities_pass(report):
        print("identity suite FAILED", file=sys.stderr)
        return 2
    _echo(args, f"all identities within tolerance over {args.samples} samples")
    return 0


def cmd_legendre(args) -> int:
    if args.sweep:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed))
        rows = ["L1,L2,L3,min_eig,bound,margin"]
        worst = np.inf
        count = 0
        while count < args.sweep:
            L1 = float(rng.uniform(0.05, 2.0))
            # alternate the sign of L2+L3 so both branches are exercised
            target_sign = 1.0 if count % 2 == 0 else -1.0
            L2 = float(rng.uniform(-1.0, 1.0))
            L3 = float(target_sign * abs(rng.uniform(0.0, 1.0)) - L2)
            if L1 + L2 + L3 <= 1e-3:
                continue
            p = MaterialParams(L1=L1, L2=L2, L3=L3)
            lam = legendre_min(p)
            bound = min(L1, L1 + L2 + L3)
            margin = lam - bound
            worst = min(worst, margin)
            rows.append(f"{L1!r},{L2!r},{L3!r},{lam!r},{bound!r},{margin!r}")
            count += 1
        text = "\n".join(rows) + "\n"
        if args.output:
            os.makedirs(args.output, exist_ok=True)
            path = os.path.join(args.output, "legendre_sweep.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            _echo(args, f"wrote {path}")
        else:
            print(text, end="")
        _echo(args, f"worst margin over {args.sweep} triples: {worst!r}")
        return 0 if worst >= -1e-9 else 2

    try:
        p = MaterialParams(L1=args.L1, L2=args.L2, L3=args.L3)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    lam = legendre_min(p)
    bound = min(p.L1, p.L0)
    print(f"min_eig = {lam!r}")
    print(f"bound   = {bound!r} (min of L1 and L1+L2+L3)")
    print(f"margin  = {lam - bound!r}")
    return 0 if lam - bound >= -1e-9 else 2


_ORDER_WINDOWS = {"elliptic": (1.8, 2.2), "stokes": (1.8, 2.2), "energy_dt": (0.8, 1.2)}


def cmd_convergence(args) -> int:
    study = args.study
    window = _ORDER_WINDOWS[study]
    rows = ["resolution,error,observed_order"]
    if study == "elliptic":
        p = MaterialParams(L1=1.0, L2=0.3, L3=-0.2)
        data = elliptic_ladder(p, ns=tuple(args.grids))
        errs = [r[2] for r in data]
        orders = observed_orders(errs)
        for k, (n, _h, err) in enumerate(data):
            rows.append(f"{n},{err!r},{'' if k == 0 else repr(orders[k - 1])}")
        final_orders = [orders[-1]]
    elif study == "stokes":
        errs_all = []
        for label, q_const, xi in (("newtonian", np.zeros((3, 3)), 0.0),
                                   ("constant_q", uniaxial_q(0.4, (1.0, 1.0, 0.0)), 1.0)):
            p = MaterialParams(xi=xi, nu=1.0)
            data = stokes_ladder(p, q_const, ns=tuple(args.grids))
            errs = [r[2] for r in data]
            orders = observed_orders(errs)
            for k, (n, _h, err, _d, _un) in enumerate(data):
                rows.append(f"{label}_{n},{err!r},{'' if k == 0 else repr(orders[k - 1])}")
            errs_all.append(orders[-1])
        final_orders = errs_all
    else:
        from .studies import energy_dt_study

        data = energy_dt_study()
        errs = [r[1] for r in data]
        orders = observed_orders(errs)
        for k, (dt, resid) in enumerate(data):
            rows.append(f"{dt!r},{resid!r},{'' if k == 0 else repr(orders[k - 1])}")
        final_orders = orders
    text = "\n".join(rows) + "\n"
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        path = os.path.join(args.output, f"convergence_{study}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        _echo(args, f"wrote {path}")
    else:
        print(text, end="")
    ok = all(window[0] <= o <= window[1] for o in final_orders)
    _echo(args, f"observed orders {final_orders} vs window {window}: {'pass' if ok else 'FAIL'}")
    if not ok:
        raise NumericalContractError(
            f"{study} study observed orders {final_orders} outside {window}")
    return 0


def _csv_row(step, state, grid) -> str:
    from .elliptic_solver import div_central

    rep = state.report
    div_max = float(np.max(np.abs(div_central(grid, state.u))))
    trq_max = float(np.max(np.abs(trace(state.q))))
    vals = [rep.f_bulk, rep.f_elastic, rep.kinetic, rep.dissipation_viscous,
            rep.dissipation_rotational, rep.energy_law_residual, div_max, trq_max]
    return ",".join([str(step), repr(state.t)] + [repr(v) for v in vals])


def _run_manufactured_stokes(cfg: SimConfig, args) -> int:
    grid = cfg.grid.to_grid()
    p = cfg.material
    q_const = uniaxial_q(cfg.scenario.amplitude, cfg.scenario.director)
    coeff = assemble_coefficient(p, q_const)
    u_exact, _, hess, _, grad_p = stokes_exact(grid)
    rhs = -np.einsum("klij,...ikl->...j", coeff, hess) + grad_p
    prob = StokesProblem(grid, coeff, rhs, cfg.solver.to_options())
    u, _, info = solve_stokes(prob)
    err = fd.norm_l2(grid, u - u_exact)
    _echo(args, f"manufactured generalized Stokes solve on {grid.n}: "
                f"velocity L2 error {err!r}, div {info.div_norm!r}")
    outdir = args.output or cfg.output.dir
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "manufactured_stokes.csv"), "w", encoding="utf-8") as fh:
        fh.write("n,h,error,div\n")
        fh.write(f"{grid.n[0]},{grid.h!r},{err!r},{info.div_norm!r}\n")
    return 0


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate requires --config PATH")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    cfg = parse_config(text, source=args.config)
    if args.output:
        cfg = SimConfig(cfg.material, cfg.grid, cfg.scenario, cfg.stepper, cfg.solver,
                        OutputConfig(args.output, cfg.output.snapshot_every, cfg.output.formats))
    if cfg.scenario.name == "manufactured_stokes":
        return _run_manufactured_stokes(cfg, args)

    grid, u0, q0, bc = build_scenario(cfg)
    p = cfg.material
    compat = compatibility_residual(p, grid, u0, q0, bc)
    _echo(args, f"compatibility residual of initial data: {compat!r}")

    outdir = cfg.output.dir
    os.makedirs(outdir, exist_ok=True)
    csv_rows = [CSV_HEADER]

    def sink(k, state):
        csv_rows.append(_csv_row(k, state, grid))
        base = os.path.join(outdir, f"snapshot_{k:06d}")
        if "structured_points" in cfg.output.formats:
            fd.write_structured_points(base + ".vtk", grid,
                                       {"Q": state.q, "u": state.u, "p": state.pressure})
        if "binary" in cfg.output.formats:
            fd.write_raw_binary(base + "_q.bin", grid, state.q)
            fd.write_raw_binary(base + "_u.bin", grid, state.u)

    final, _reports = run(p, grid, (u0, q0), bc, cfg.stepper.to_options(),
                          cfg.stepper.n_steps, cfg.output.snapshot_every,
                          sink=sink, solver_opts=cfg.solver.to_options())
    if "csv" in cfg.output.formats:
        with open(os.path.join(outdir, "diagnostics.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(csv_rows) + "\n")
    drift = float(np.max(np.abs(final.q - q0))) if cfg.scenario.name == "stationary_check" else None
    if drift is not None:
        _echo(args, f"stationary drift over {cfg.stepper.n_steps} steps: {drift!r}")
    _echo(args, f"finished {cfg.stepper.n_steps} steps; diagnostics in {outdir}")
    return 0


def cmd_dump_schema(args) -> int:
    print(dump_config_schema(), end="")
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nematoflow",
        description="Q-tensor nematic hydrodynamics: simulator and verification suite")
    parser.add_argument("--config", metavar="PATH", help="configuration file")
    parser.add_argument("--seed", type=int, default=42, help="PRNG seed (default 42)")
    parser.add_argument("--samples", type=int, default=10000,
                        help="sample count for randomized suites")
    parser.add_argument("--output", metavar="DIR", help="output directory override")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("NEMATOFLOW_THREADS", "0") or 0),
                        help="kernel thread hint (0 = library default)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("simulate", help="run a configured scenario")
    sub.add_parser("verify-identities", help="randomized pointwise tensor identity suite")

    leg = sub.add_parser("legendre", help="ellipticity margin of the elastic operator")
    leg.add_argument("--L1", type=float, default=1.0)
    leg.add_argument("--L2", type=float, default=0.0)
    leg.add_argument("--L3", type=float, default=0.0)
    leg.add_argument("--sweep", type=int, default=0, metavar="N",
                     help="check N random coefficient triples instead")

    conv = sub.add_parser("convergence", help="manufactured-solution convergence studies")
    conv.add_argument("study", choices=("elliptic", "stokes", "energy_dt"))
    conv.add_argument("--grids", type=int, nargs="+", default=[8, 16, 32])

    sub.add_parser("dump-config-schema", help="print the config key schema")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; the contract is 1
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_help()
        return 1
    handlers = {
        "simulate": cmd_simulate,
        "verify-identities": cmd_verify_identities,
        "legendre": cmd_legendre,
        "convergence": cmd_convergence,
        "dump-config-schema": cmd_dump_schema,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except NumericalContractError as err:
        print(f"numerical contract violation: {err}", file=sys.stderr)
        return 2
    except SolverConvergenceError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
