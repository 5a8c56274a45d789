"""Run orchestration: configs, scenarios, monitors and on-disk artifacts.

A run is described by a flat, typed key-value text file with dotted section
names (full schema in CONFIG_SCHEMA; unknown keys are rejected with their
line number).  Every run writes into its output directory:

    series.csv      one row per recorded step, 17-significant-digit floats
    manifest.json   resolved config, content hash, outcome and monitors
    difference.csv / contraction.csv / lemma_a1.csv   per experiment
    snapshots/*.fkp optional binary checkpoints

All randomness is drawn from one seeded generator, and all schemes are
deterministic, so identical config + seed reproduces every artifact
byte for byte.  Files are written to a temporary name and renamed.
"""

import hashlib
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import coupling, fluid as fluid_mod
from .checkpoint import checkpoint_load, checkpoint_save
from .configspace import ConfDistribution, build_quadrature, eigen_basis, \
    lemma_a1_check
from .coupling import CoupledState, FixedPointConfig, blowup_indicator, \
    contraction_factor, run_fixed_point, stress_field, xs_distance
from .errors import CFLViolation, ConfigError, FeneError, PositivityLoss, \
    StabilityViolation, VersionError
from .fluid import FluidState, FluidStepConfig, fluid_energy, phi_r
from .fokker_planck import FPStepConfig, PolymerField, fp_energy, fp_step, \
    nonnegativity_report, polymer_mass
from .model import ForcingSpec, ModelParams, density_to_r, r_to_density
from .torus import SpectralField, TorusGrid, grad_u_sup_norm, sobolev_norm, \
    sup_norm_w2inf

S_RECORD = 3  # Sobolev indices 0..S_RECORD appear as monitor columns

SCENARIOS = ("equilibrium", "shear_perturbation", "density_bump",
             "stress_difference", "contraction_study", "lemma_a1")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_STABILITY = 4
EXIT_BLOWUP = 5
EXIT_CHECKPOINT = 6


def _parse_int(text):
    return int(text)


def _parse_float(text):
    return float(text)


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_opt_float(text):
    return None if text.lower() == "none" else float(text)


def _parse_auto_int(text):
    return None if text.lower() in ("auto", "none") else int(text)


def _parse_chi(text):
    low = text.lower()
    if low == "auto":
        return "auto"
    if low in ("off", "none"):
        return None
    return int(text)


def _parse_float_list(text):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_int_pair(text):
    parts = [int(tok) for tok in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated integers")
    return tuple(parts)


def _parse_str(*choices):
    def parse(text):
        if choices and text not in choices:
            raise ValueError(f"expected one of {choices}, got {text!r}")
        return text
    return parse


CONFIG_SCHEMA = {
    "scenario": (_parse_str(*SCENARIOS), "equilibrium"),
    "seed": (_parse_int, 1234),
    "max_steps": (_parse_int, 100),
    "record_every": (_parse_int, 1),
    "output": (_parse_str(), "fene_run"),
    "blowup_ceiling": (_parse_float, 1e3),
    "snapshots.every": (_parse_int, 0),
    "model.a": (_parse_float, 1.0),
    "model.gamma": (_parse_float, 1.4),
    "model.mu_s": (_parse_float, 1.0),
    "model.mu_b": (_parse_float, 0.5),
    "model.epsilon": (_parse_float, 0.0),
    "model.a11": (_parse_float, 1.0),
    "model.lambda": (_parse_float, 1.0),
    "model.b": (_parse_float, 4.0),
    "forcing.kind": (_parse_str("zero", "steady_field", "time_periodic"),
                     "zero"),
    "forcing.amplitude": (_parse_float, 0.0),
    "forcing.mode": (_parse_int_pair, (1, 0)),
    "grid.n_points": (_parse_int, 32),
    "ball.n_radial": (_parse_int, 32),
    "ball.n_angular": (_parse_int, 32),
    "ball.n_basis": (_parse_int, 40),
    "ball.chi_index": (_parse_chi, "auto"),
    "fluid.dt": (_parse_float, 1e-3),
    "fluid.cutoff_r": (_parse_opt_float, None),
    "fluid.n_modes": (_parse_auto_int, None),
    "fluid.cfl_safety": (_parse_opt_float, 0.8),
    "fp.dt": (_parse_float, 1e-3),
    "fp.scheme": (_parse_str("imex_euler", "ssprk3_explicit"), "imex_euler"),
    "scenario.amplitude": (_parse_float, 1e-3),
    "scenario.mode": (_parse_int, 1),
    "scenario.mean_velocity": (_parse_float, 0.1),
    "scenario.psi_mode": (_parse_int, 1),
    "scenario.rho0": (_parse_float, 1.0),
    "experiment.horizon": (_parse_float, 0.05),
    "experiment.deltas": (_parse_float_list, (1e-4, 1e-3, 1e-2)),
    "experiment.lemma_deltas": (_parse_float_list, (1.0, 0.1, 0.01)),
    "experiment.ensemble": (_parse_int, 200),
    "fixed_point.s": (_parse_int, 2),
    "fixed_point.s_prime": (_parse_int, 1),
    "fixed_point.max_iters": (_parse_int, 5),
    "fixed_point.stop_tol": (_parse_float, 0.0),
}


class RunConfig:
    """Resolved configuration: schema defaults overlaid by the file."""

    def __init__(self, values, text=""):
        self.values = values
        self.text = text

    def __getitem__(self, key):
        return self.values[key]

    def content_hash(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    def resolved(self):
        out = {}
        for key, val in sorted(self.values.items()):
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def parse_config_text(text) -> RunConfig:
    values = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError("unknown configuration key", line=lineno,
                              field=key)
        if key in seen:
            raise ConfigError("duplicate key", line=lineno, field=key)
        seen.add(key)
        parser, _ = CONFIG_SCHEMA[key]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, field=key) from None
    return RunConfig(values, text)


def parse_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


class RunContext:
    """Grid, basis and solver configs materialized from a RunConfig."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        try:
            self.params = ModelParams(
                a=cfg["model.a"], gamma=cfg["model.gamma"],
                mu_s=cfg["model.mu_s"], mu_b=cfg["model.mu_b"],
                epsilon=cfg["model.epsilon"], a11=cfg["model.a11"],
                lam=cfg["model.lambda"], b=cfg["model.b"])
        except ValueError as exc:
            raise ConfigError(str(exc), field="model") from None
        try:
            self.grid = TorusGrid(cfg["grid.n_points"])
            self.quad = build_quadrature(self.params.b, cfg["ball.n_radial"],
                                         cfg["ball.n_angular"])
            self.basis = eigen_basis(self.quad, cfg["ball.n_basis"])
        except ValueError as exc:
            raise ConfigError(str(exc), field="grid/ball") from None
        chi = cfg["ball.chi_index"]
        self.chi_index = cfg["ball.n_radial"] if chi == "auto" else chi
        if abs(cfg["fluid.dt"] - cfg["fp.dt"]) > 1e-15 and \
                cfg["scenario"] in ("equilibrium", "shear_perturbation",
                                    "density_bump", "contraction_study"):
            raise ConfigError("coupled scenarios need fluid.dt == fp.dt",
                              field="fp.dt")
        self.fluid_cfg = FluidStepConfig(
            dt=cfg["fluid.dt"], cutoff_R=cfg["fluid.cutoff_r"],
            n_modes=cfg["fluid.n_modes"], cfl_safety=cfg["fluid.cfl_safety"])
        self.fp_cfg = FPStepConfig(
            dt=cfg["fp.dt"], chi_index=self.chi_index,
            scheme=cfg["fp.scheme"])
        self.forcing = ForcingSpec(kind=cfg["forcing.kind"],
                                   amplitude=cfg["forcing.amplitude"],
                                   mode=cfg["forcing.mode"])
        self.seed = cfg["seed"]

    def initial_state(self) -> CoupledState:
        cfg = self.cfg
        name = cfg["scenario"]
        x1, x2 = self.grid.x
        amp = cfg["scenario.amplitude"]
        m = cfg["scenario.mode"]
        rho0 = cfg["scenario.rho0"]
        n = self.grid.n_points

        if name == "density_bump":
            rho = rho0 * (1.0 + amp * np.cos(m * x1) * np.cos(m * x2))
            uvals = np.zeros((2, n, n))
            psi = PolymerField.equilibrium(self.grid, self.basis)
        elif name == "equilibrium":
            rho = np.full((n, n), rho0)
            uvals = np.zeros((2, n, n))
            psi = PolymerField.equilibrium(self.grid, self.basis)
        else:
            # shear_perturbation and the experiment base states
            rho = rho0 * (1.0 + 0.5 * amp * np.cos(m * x1))
            uvals = np.stack([
                cfg["scenario.mean_velocity"] + amp * np.sin(m * x2),
                0.5 * amp * np.sin(m * x1)])
            mode = cfg["scenario.psi_mode"]
            if not 0 < mode < self.basis.n_basis:
                raise ConfigError("psi_mode out of range",
                                  field="scenario.psi_mode")
            fields = {0: np.ones((n, n)), mode: amp * np.cos(m * x2)}
            psi = PolymerField.from_coefficient_fields(self.grid, self.basis,
                                                       fields)
        r = SpectralField.from_values(self.grid, density_to_r(rho, self.params))
        u = SpectralField.from_values(self.grid, uvals)
        return CoupledState(FluidState(r, u), psi)


@dataclass
class TimeSeriesRecord:
    """One monitored row; all columns are instantaneous functions of the
    state, so resumed runs reproduce them bitwise."""

    time: float
    mass: float
    momentum_x: float
    momentum_y: float
    polymer_mass: float
    min_r: float
    max_r: float
    min_psi_sample: float
    blowup_indicator: float
    cutoff_active: int
    grad_u_sup: float
    fluid_energy_s: tuple
    u_norm_sq_s: tuple
    fp_l2m_s: tuple
    fp_h1m_s: tuple
    stress_sq_s: tuple
    forcing_sq_s: tuple

    @staticmethod
    def header():
        cols = ["time", "mass", "momentum_x", "momentum_y", "polymer_mass",
                "min_r", "max_r", "min_psi_sample", "blowup_indicator",
                "cutoff_active", "grad_u_sup"]
        for name, top in (("fluid_energy_s", S_RECORD),
                          ("u_norm_sq_s", S_RECORD + 1),
                          ("fp_l2m_s", S_RECORD), ("fp_h1m_s", S_RECORD),
                          ("stress_sq_s", S_RECORD),
                          ("forcing_sq_s", S_RECORD)):
            cols.extend(f"{name}{s}" for s in range(top + 1))
        return cols

    def row(self):
        out = [self.time, self.mass, self.momentum_x, self.momentum_y,
               self.polymer_mass, self.min_r, self.max_r,
               self.min_psi_sample, self.blowup_indicator,
               float(self.cutoff_active), self.grad_u_sup]
        for block in (self.fluid_energy_s, self.u_norm_sq_s, self.fp_l2m_s,
                      self.fp_h1m_s, self.stress_sq_s, self.forcing_sq_s):
            out.extend(block)
        return out


def record_state(state: CoupledState, ctx: RunContext) -> TimeSeriesRecord:
    params, grid = ctx.params, ctx.grid
    rvals = state.fluid.r.values()[0]
    rho = r_to_density(rvals, params)
    uv = state.fluid.u.values()
    area = grid.cell_area()
    mass = float(np.sum(rho) * area)
    mom = (float(np.sum(rho * uv[0]) * area),
           float(np.sum(rho * uv[1]) * area))
    psi_min, _ = nonnegativity_report(state.psi)
    stress = stress_field(state.psi)
    f_field = fluid_mod._forcing_field(ctx.forcing, grid, state.time)
    cutoff_active = 0
    if ctx.fluid_cfg.cutoff_R is not None:
        cutoff_active = int(
            phi_r(sup_norm_w2inf(state.fluid.u), ctx.fluid_cfg.cutoff_R) < 1.0)
    fl_e, u_sq, l2m, h1m, t_sq, f_sq = [], [], [], [], [], []
    for s in range(S_RECORD + 1):
        fl_e.append(fluid_energy(state.fluid, s))
        le, he = fp_energy(state.psi, s)
        l2m.append(le)
        h1m.append(he)
        t_sq.append(sobolev_norm(stress, s) ** 2)
        f_sq.append(0.0 if f_field is None else sobolev_norm(f_field, s) ** 2)
    for s in range(S_RECORD + 2):
        u_sq.append(sobolev_norm(state.fluid.u, s) ** 2)
    return TimeSeriesRecord(
        time=state.time, mass=mass, momentum_x=mom[0], momentum_y=mom[1],
        polymer_mass=polymer_mass(state.psi), min_r=float(rvals.min()),
        max_r=float(rvals.max()), min_psi_sample=psi_min,
        blowup_indicator=blowup_indicator(state),
        cutoff_active=cutoff_active,
        grad_u_sup=grad_u_sup_norm(state.fluid.u),
        fluid_energy_s=tuple(fl_e), u_norm_sq_s=tuple(u_sq),
        fp_l2m_s=tuple(l2m), fp_h1m_s=tuple(h1m), stress_sq_s=tuple(t_sq),
        forcing_sq_s=tuple(f_sq))


def _fmt(x):
    return f"{x:.17g}"


def write_csv(path, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def write_manifest(outdir, payload):
    path = os.path.join(outdir, "manifest.json")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# monitors evaluated on recorded series

def conservation_drifts(records):
    """Relative drifts of mass, momentum and polymer mass over the series."""
    def rel(series):
        ref = max(abs(series[0]), 1.0)
        return float(np.max(np.abs(np.asarray(series) - series[0])) / ref)

    return {
        "mass": rel([r.mass for r in records]),
        "momentum_x": rel([r.momentum_x for r in records]),
        "momentum_y": rel([r.momentum_y for r in records]),
        "polymer_mass": rel([r.polymer_mass for r in records]),
    }


def envelope_margin(records, params: ModelParams):
    """Smallest signed distance of (min_r, max_r) to the maximum-principle
    envelope built from the accumulated |grad u| integral; nonnegative means
    the density stayed inside for the whole horizon."""
    times = np.array([r.time for r in records])
    grads = np.array([r.grad_u_sup for r in records])
    integral = np.concatenate([[0.0], np.cumsum(
        0.5 * (grads[1:] + grads[:-1]) * np.diff(times))])
    c = max(1.0, 0.5 * (params.gamma - 1.0))
    lower = records[0].min_r * np.exp(-c * integral)
    upper = records[0].max_r * np.exp(c * integral)
    min_r = np.array([r.min_r for r in records])
    max_r = np.array([r.max_r for r in records])
    return float(min((min_r - lower).min(), (upper - max_r).min()))


def fitted_psi_constant(records, s=2):
    """Smallest c making log |psi|^2_{W^{s,2} L^2_M} - c int |u|^2_{W^{s+1,2}}
    nonincreasing across the recorded steps."""
    log_e = np.log([r.fp_l2m_s[s] for r in records])
    u_sq = np.array([r.u_norm_sq_s[s + 1] for r in records])
    times = np.array([r.time for r in records])
    d_int = 0.5 * (u_sq[1:] + u_sq[:-1]) * np.diff(times)
    d_log = np.diff(log_e)
    c = 0.0
    for growth, gate in zip(d_log, d_int):
        if growth > 0.0:
            if gate <= 0.0:
                return np.inf
            c = max(c, growth / gate)
    return float(c)


def fitted_fluid_constant(records, s=2):
    """Smallest c with E_s(t) + int_0^t |u|^2_{s+1} <= c (E_s(0) +
    int_0^t (|f|^2_s + |T|^2_s)), the discrete shape of the fluid energy
    estimate."""
    e = np.array([r.fluid_energy_s[s] for r in records])
    u_sq = np.array([r.u_norm_sq_s[s + 1] for r in records])
    src = np.array([r.stress_sq_s[s] + r.forcing_sq_s[s] for r in records])
    times = np.array([r.time for r in records])
    int_u = np.concatenate([[0.0], np.cumsum(
        0.5 * (u_sq[1:] + u_sq[:-1]) * np.diff(times))])
    int_src = np.concatenate([[0.0], np.cumsum(
        0.5 * (src[1:] + src[:-1]) * np.diff(times))])
    return float(np.max((e + int_u) / (e[0] + int_src)))


def summarize(records, params):
    return {
        "steps_recorded": len(records),
        "drifts": conservation_drifts(records),
        "envelope_margin": envelope_margin(records, params),
        "fitted_c_psi": fitted_psi_constant(records),
        "fitted_c_fluid": fitted_fluid_constant(records),
        "max_blowup_indicator": float(max(r.blowup_indicator
                                          for r in records)),
        "min_psi_sample": float(min(r.min_psi_sample for r in records)),
    }


# ---------------------------------------------------------------------------
# scenario drivers

class _BlowupCeiling(FeneError):
    pass


def _run_stepping(ctx: RunContext, outdir, max_steps, ceiling,
                  state=None, first_step=0):
    cfg = ctx.cfg
    state = ctx.initial_state() if state is None else state
    every = cfg["record_every"]
    snap_every = cfg["snapshots.every"]
    if snap_every:
        os.makedirs(os.path.join(outdir, "snapshots"), exist_ok=True)
    records = [record_state(state, ctx)]
    if records[-1].blowup_indicator > ceiling:
        raise _BlowupCeiling("blow-up indicator above ceiling at start")
    for k in range(first_step + 1, max_steps + 1):
        state = coupling.coupled_step(state, ctx.params, ctx.forcing,
                                      ctx.fluid_cfg, ctx.fp_cfg)
        if k % every == 0 or k == max_steps:
            rec = record_state(state, ctx)
            records.append(rec)
            if rec.blowup_indicator > ceiling:
                _flush_series(outdir, records)
                raise _BlowupCeiling(
                    f"blow-up indicator {rec.blowup_indicator:.3e} exceeded "
                    f"ceiling {ceiling:.3e} at step {k}")
        if snap_every and k % snap_every == 0:
            checkpoint_save(state, os.path.join(
                outdir, "snapshots", f"step{k:06d}.fkp"))
    _flush_series(outdir, records)
    return records, state


def _flush_series(outdir, records):
    write_csv(os.path.join(outdir, "series.csv"), TimeSeriesRecord.header(),
              [r.row() for r in records])


def _loglog_slope(deltas, dists):
    return float(np.polyfit(np.log(deltas), np.log(dists), 1)[0])


def _run_stress_difference(ctx: RunContext, outdir):
    cfg = ctx.cfg
    dt = ctx.fluid_cfg.dt
    horizon = cfg["experiment.horizon"]
    n_steps = max(int(round(horizon / dt)), 2)
    deltas = cfg["experiment.deltas"]
    state0 = ctx.initial_state()
    grid = ctx.grid
    x1, x2 = grid.x
    s_prime = cfg["fixed_point.s_prime"]

    base_stress = stress_field(state0.psi)
    pert = SpectralField.from_values(grid, np.stack(
        [np.sin(x1), 0.5 * np.cos(x1 + x2), np.sin(x2)]))

    def fluid_solve(stress):
        st = state0.fluid
        out = [st]
        for _ in range(n_steps):
            st = fluid_mod.step(st, stress, ctx.forcing, ctx.params,
                                ctx.fluid_cfg)
            out.append(st)
        return out

    def fluid_distance(a, b):
        return max(np.sqrt(
            sobolev_norm(x.r - y.r, s_prime) ** 2 +
            sobolev_norm(x.u - y.u, s_prime) ** 2)
            for x, y in zip(a, b))

    base_traj = fluid_solve(base_stress)
    rows = []
    fluid_d = []
    for delta in deltas:
        traj = fluid_solve(base_stress + float(delta) * pert)
        dist = fluid_distance(traj, base_traj)
        fluid_d.append(dist)
        rows.append(("fluid", delta, dist))

    u_base = state0.fluid.u
    u_pert = SpectralField.from_values(grid, np.stack(
        [np.sin(x2), np.sin(x1)]))

    def fp_solve(u):
        psi = state0.psi
        out = [psi]
        for _ in range(n_steps):
            psi = fp_step(psi, u, ctx.params, ctx.fp_cfg)
            out.append(psi)
        return out

    base_psi = fp_solve(u_base)
    fp_d = []
    for delta in deltas:
        traj = fp_solve(u_base + float(delta) * u_pert)
        dist = xs_distance(traj, base_psi, s_prime)
        fp_d.append(dist)
        rows.append(("fp", delta, dist))

    path = os.path.join(outdir, "difference.csv")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("kind,delta,distance\n")
        for kind, delta, dist in rows:
            fh.write(f"{kind},{_fmt(delta)},{_fmt(dist)}\n")
    os.replace(tmp, path)
    return {
        "fluid_slope": _loglog_slope(deltas, fluid_d),
        "fp_slope": _loglog_slope(deltas, fp_d),
        "rows": [[k, d, v] for k, d, v in rows],
    }


def _run_contraction(ctx: RunContext, outdir):
    cfg = ctx.cfg
    fp_cfg = FPStepConfig(dt=ctx.fp_cfg.dt, chi_index=ctx.chi_index,
                          scheme="ssprk3_explicit")
    fpc = FixedPointConfig(
        horizon_T=cfg["experiment.horizon"], s=cfg["fixed_point.s"],
        s_prime=cfg["fixed_point.s_prime"],
        max_iters=cfg["fixed_point.max_iters"],
        stop_tol=cfg["fixed_point.stop_tol"])
    state0 = ctx.initial_state()
    iterates = run_fixed_point(state0, ctx.params, ctx.forcing, ctx.fluid_cfg,
                               fp_cfg, fpc)
    ratios, converged = contraction_factor(iterates, fpc.s_prime)
    dists = [xs_distance(iterates[k + 1], iterates[k], fpc.s_prime)
             for k in range(len(iterates) - 1)]

    n_steps = int(round(fpc.horizon_T / ctx.fluid_cfg.dt))
    mono = state0
    mono_traj = [state0.psi]
    for _ in range(n_steps):
        mono = coupling.coupled_step(mono, ctx.params, ctx.forcing,
                                     ctx.fluid_cfg, fp_cfg)
        mono_traj.append(mono.psi)
    terminal = xs_distance(iterates[-1], mono_traj, fpc.s_prime)

    path = os.path.join(outdir, "contraction.csv")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("iteration,distance,ratio\n")
        for k, dist in enumerate(dists):
            ratio = ratios[k - 1] if 0 < k <= len(ratios) else np.nan
            fh.write(f"{k},{_fmt(dist)},{_fmt(ratio)}\n")
    os.replace(tmp, path)
    return {
        "distances": dists,
        "ratios": ratios,
        "converged": converged,
        "all_ratios_below_one": bool(ratios and all(r < 1 for r in ratios)),
        "distance_to_monolithic": terminal,
    }


def _run_lemma_a1(ctx: RunContext, outdir):
    cfg = ctx.cfg
    n_ensemble = cfg["experiment.ensemble"]
    if n_ensemble < 100:
        raise ConfigError("lemma_a1 needs an ensemble of at least 100",
                          field="experiment.ensemble")
    rng = np.random.default_rng(ctx.seed)
    deltas = cfg["experiment.lemma_deltas"]
    samples = [ConfDistribution(ctx.basis,
                                rng.standard_normal(ctx.basis.n_basis))
               for _ in range(n_ensemble)]
    parts = [lemma_a1_check(dist, 1.0, ctx.quad) for dist in samples]
    results = {}
    for delta in deltas:
        best = -np.inf
        for lhs, h1_unit, l2 in parts:
            best = max(best, (lhs - delta * h1_unit) / l2)
        results[delta] = best
    path = os.path.join(outdir, "lemma_a1.csv")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("delta,c_delta\n")
        for delta in deltas:
            fh.write(f"{_fmt(delta)},{_fmt(results[delta])}\n")
    os.replace(tmp, path)
    ordered = [results[d] for d in sorted(deltas, reverse=True)]
    return {
        "c_delta": {str(d): results[d] for d in deltas},
        "monotone": bool(all(a <= b + 1e-12
                             for a, b in zip(ordered, ordered[1:]))),
        "ensemble": n_ensemble,
    }


# ---------------------------------------------------------------------------
# entry points shared by the CLI

def _error_payload(code, exc):
    return {"status": "error", "reason": code, "message": str(exc)}


def _classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, PositivityLoss):
        return EXIT_POSITIVITY
    if isinstance(exc, (CFLViolation, StabilityViolation)):
        return EXIT_STABILITY
    if isinstance(exc, _BlowupCeiling):
        return EXIT_BLOWUP
    if isinstance(exc, VersionError):
        return EXIT_CHECKPOINT
    return 1


_REASONS = {
    EXIT_CONFIG: "ConfigError",
    EXIT_POSITIVITY: "PositivityLoss",
    EXIT_STABILITY: "StabilityViolation",
    EXIT_BLOWUP: "BlowupCeiling",
    EXIT_CHECKPOINT: "VersionError",
    1: "InternalError",
}


def run(config_path, output=None, seed=None, max_steps=None, ceiling=None,
        resume_from=None, stderr=None):
    """Execute a configured run; returns the process exit code."""
    stderr = sys.stderr if stderr is None else stderr
    outdir = None
    try:
        cfg = parse_config(config_path)
        if seed is not None:
            cfg.values["seed"] = int(seed)
        if max_steps is not None:
            cfg.values["max_steps"] = int(max_steps)
        outdir = output or cfg["output"]
        os.makedirs(outdir, exist_ok=True)
        ceiling = cfg["blowup_ceiling"] if ceiling is None else float(ceiling)
        ctx = RunContext(cfg)

        scenario = cfg["scenario"]
        extra = {}
        if scenario in ("equilibrium", "shear_perturbation", "density_bump"):
            state, first_step = None, 0
            if resume_from is not None:
                state = checkpoint_load(resume_from, grid=ctx.grid,
                                        basis=ctx.basis)
                first_step = int(round(state.time / ctx.fluid_cfg.dt))
                extra["resumed_from"] = str(resume_from)
                extra["resumed_step"] = first_step
            records, _ = _run_stepping(ctx, outdir, cfg["max_steps"],
                                       ceiling, state, first_step)
            extra.update(summarize(records, ctx.params))
        elif scenario == "stress_difference":
            extra = _run_stress_difference(ctx, outdir)
        elif scenario == "contraction_study":
            extra = _run_contraction(ctx, outdir)
        elif scenario == "lemma_a1":
            extra = _run_lemma_a1(ctx, outdir)

        write_manifest(outdir, {
            "status": "ok",
            "scenario": scenario,
            "config": cfg.resolved(),
            "config_hash": cfg.content_hash(),
            "outcome": extra,
        })
        return EXIT_OK
    except FeneError as exc:
        code = _classify(exc)
        payload = _error_payload(_REASONS[code], exc)
        print(json.dumps(payload), file=stderr)
        if outdir is not None:
            try:
                write_manifest(outdir, payload)
            except OSError:
                pass
        return code
    except OSError as exc:
        print(json.dumps(_error_payload("IOError", exc)), file=stderr)
        return 1


def resume(checkpoint_path, config_path, output=None, seed=None,
           max_steps=None, ceiling=None, stderr=None):
    return run(config_path, output=output, seed=seed, max_steps=max_steps,
               ceiling=ceiling, resume_from=checkpoint_path, stderr=stderr)


def load_series(run_dir):
    """Parse series.csv back into TimeSeriesRecord objects."""
    path = os.path.join(run_dir, "series.csv")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [list(map(float, line.strip().split(",")))
                for line in fh if line.strip()]
    expected = TimeSeriesRecord.header()
    if header != expected:
        raise VersionError(f"{path}: unexpected column layout")
    records = []
    for row in data:
        vals = dict(zip(header, row))
        def block(name, top):
            return tuple(vals[f"{name}{s}"] for s in range(top + 1))
        records.append(TimeSeriesRecord(
            time=vals["time"], mass=vals["mass"],
            momentum_x=vals["momentum_x"], momentum_y=vals["momentum_y"],
            polymer_mass=vals["polymer_mass"], min_r=vals["min_r"],
            max_r=vals["max_r"], min_psi_sample=vals["min_psi_sample"],
            blowup_indicator=vals["blowup_indicator"],
            cutoff_active=int(vals["cutoff_active"]),
            grad_u_sup=vals["grad_u_sup"],
            fluid_energy_s=block("fluid_energy_s", S_RECORD),
            u_norm_sq_s=block("u_norm_sq_s", S_RECORD + 1),
            fp_l2m_s=block("fp_l2m_s", S_RECORD),
            fp_h1m_s=block("fp_h1m_s", S_RECORD),
            stress_sq_s=block("stress_sq_s", S_RECORD),
            forcing_sq_s=block("forcing_sq_s", S_RECORD)))
    return records


def report(run_dir, stream=None):
    """Human summary of a finished run directory."""
    stream = sys.stdout if stream is None else stream
    manifest_path = os.path.join(run_dir, "manifest.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    print(f"run: {run_dir}", file=stream)
    print(f"status: {manifest.get('status')}", file=stream)
    scenario = manifest.get("scenario", "?")
    print(f"scenario: {scenario}", file=stream)
    outcome = manifest.get("outcome", {})
    if os.path.exists(os.path.join(run_dir, "series.csv")):
        records = load_series(run_dir)
        gamma = manifest["config"]["model.gamma"]
        params = ModelParams(gamma=gamma, b=manifest["config"]["model.b"])
        drifts = conservation_drifts(records)
        print(f"steps recorded: {len(records)}", file=stream)
        for name, val in drifts.items():
            print(f"drift {name}: {val:.3e}", file=stream)
        print(f"envelope margin: {envelope_margin(records, params):.3e}",
              file=stream)
        print(f"fitted c_psi: {fitted_psi_constant(records):.3e}",
              file=stream)
        print(f"fitted c_fluid: {fitted_fluid_constant(records):.3e}",
              file=stream)
        print(f"max blow-up indicator: "
              f"{max(r.blowup_indicator for r in records):.3e}", file=stream)
    for key in ("fluid_slope", "fp_slope", "ratios", "converged",
                "distance_to_monolithic", "c_delta", "monotone"):
        if key in outcome:
            print(f"{key}: {outcome[key]}", file=stream)
    return EXIT_OK
