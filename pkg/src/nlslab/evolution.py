"""Radial split-step evolution of i u_t + Lap u - V u + |u|^{p-1} u = 0.

The state is w = r u on the interior nodes.  One Strang step applies half a
pointwise phase rotation w * exp(i tau (|w/r|^{p-1} - V)), the exact linear
flow exp(-i dt k^2) on sine coefficients, then the second half rotation.
Both sub-flows are unitary, so mass is conserved to round-off.

Higher-order schemes are symmetric compositions of the Strang step
(Yoshida's fourth- and sixth-order triple-jump coefficients); they matter
for runs near the ground state, whose unstable mode amplifies the
second-order splitting error.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft

from .errors import ValidationError
from .functionals import FunctionalSnapshot, potential_samples, snapshot_values
from .grid import RadialField, RadialGrid, integrate3d
from .potentials import PotentialSpec

_CBRT2 = 2.0 ** (1.0 / 3.0)
_Y4 = (1 / (2 - _CBRT2), -_CBRT2 / (2 - _CBRT2), 1 / (2 - _CBRT2))
_W6 = (-1.17767998417887, 0.235573213359357, 0.784513610477560)
_Y6_MID = 1.0 - 2.0 * sum(_W6)
_Y6 = (_W6[2], _W6[1], _W6[0], _Y6_MID, _W6[0], _W6[1], _W6[2])
SCHEMES = {"strang": (1.0,), "yoshida4": _Y4, "yoshida6": _Y6}
SCHEME_ORDER = {"strang": 2, "yoshida4": 4, "yoshida6": 6}

COMPLETED = "CompletedHorizon"
BLOWUP = "BlowUpDetected"
UNDERRESOLVED = "Underresolved"


@dataclass(frozen=True)
class EvolveConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    store_every: int = 10
    blowup_factor: float = 1e3
    dt_floor: float = 1e-10
    R_probe: float = 10.0
    scheme: str = "strang"
    # cap on the nonlinear phase rotation per step, max|u|^{p-1} dt <= max_phase
    max_phase: float | None = 0.05
    wall_zone: float = 0.9
    wall_fraction: float = 0.01
    store_fields: bool = False
    # radii R for which int_{r <= R/2} |u|^{p+1} is recorded (Morawetz averages)
    morawetz_radii: tuple = ()

    def __post_init__(self):
        if not self.dt0 > self.dt_floor:
            raise ValidationError(f"need dt0 > dt_floor, got dt0 = {self.dt0}, dt_floor = {self.dt_floor}")
        if not self.dt_floor > 0:
            raise ValidationError(f"need dt_floor > 0, got {self.dt_floor}")
        if not self.t_end > 0:
            raise ValidationError(f"need t_end > 0, got {self.t_end}")
        if int(self.store_every) != self.store_every or self.store_every < 1:
            raise ValidationError(f"store_every must be a positive step count, got {self.store_every}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if self.blowup_factor <= 1:
            raise ValidationError("blowup_factor must exceed 1")
        if self.R_probe <= 0:
            raise ValidationError("R_probe must be positive")
        if any(not R > 0 for R in self.morawetz_radii):
            raise ValidationError("morawetz_radii must be positive")
        object.__setattr__(self, "morawetz_radii", tuple(float(R) for R in self.morawetz_radii))
        if self.max_phase is not None and self.max_phase <= 0:
            raise ValidationError("max_phase must be positive or None")

    def to_dict(self):
        from dataclasses import asdict
        return asdict(self)


@dataclass(frozen=True)
class Terminal:
    kind: str
    t: float
    reason: str = ""

    def __str__(self):
        return f"{self.kind}({self.t:.6g})"


@dataclass
class EvolutionTrace:
    p: float
    grid: RadialGrid
    config: EvolveConfig
    snapshots: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    localized_mass: list = field(default_factory=list)
    localized_lp1: list = field(default_factory=list)
    lp1_radius: list = field(default_factory=list)
    wall_mass: list = field(default_factory=list)
    spectral_tail: list = field(default_factory=list)
    virial_series: dict = field(default_factory=dict)
    interior_lp1: dict = field(default_factory=dict)
    fields: list = field(default_factory=list)
    final_field: RadialField | None = None
    terminal: Terminal | None = None
    steps: int = 0
    nonlinearity: float = 1.0
    potential: dict | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])

    @property
    def mass_drift(self) -> float:
        m = self.series("mass")
        return float(np.max(np.abs(m - m[0])) / m[0])

    @property
    def energy_drift(self) -> float:
        e = self.series("energy_v")
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))

    @property
    def wall_contamination_time(self) -> float | None:
        for t, w in zip(self.times, self.wall_mass):
            if w > self.config.wall_fraction:
                return float(t)
        return None

    def rows(self):
        """Rows for the trace CSV."""
        for i, s in enumerate(self.snapshots):
            yield (s.t, s.mass, s.grad_sq, s.pot_term, s.lp1, s.energy_v, s.k_functional,
                   self.localized_mass[i], self.dts[i])

    CSV_HEADER = ("t", "mass", "grad_sq", "pot_term", "lp1", "energy_v", "k_functional",
                  "localized_mass", "dt")

    def summary(self) -> dict:
        wc = self.wall_contamination_time
        return {
            "terminal": {"kind": self.terminal.kind, "t": self.terminal.t,
                         "reason": self.terminal.reason},
            "steps": self.steps, "snapshots": len(self.snapshots),
            "mass_drift": self.mass_drift, "energy_drift": self.energy_drift,
            "wall_contamination_time": wc,
            "max_spectral_tail": float(np.max(self.spectral_tail)) if self.spectral_tail else 0.0,
            "blowup_criterion": (f"grad_sq >= {self.config.blowup_factor:g} x initial "
                                 f"or dt < {self.config.dt_floor:g}"),
            "p": self.p, "grid": self.grid.to_dict(), "config": self.config.to_dict(),
            "potential": self.potential, "nonlinearity": self.nonlinearity,
        }


@dataclass
class StoredTrace:
    """Fields and metadata saved by an evolve run, enough to recompute virial series."""

    p: float
    grid: RadialGrid
    times: np.ndarray
    fields: list
    potential: dict | None
    nonlinearity: float = 1.0
    virial_series: dict = field(default_factory=dict)
    interior_lp1: dict = field(default_factory=dict)


def save_fields(trace: EvolutionTrace, path) -> None:
    """Write snapshot times, stored fields and run metadata to an .npz file."""
    import json
    from .serialize import write_npz
    fields = np.array(trace.fields) if trace.fields else np.zeros((0, trace.grid.n), dtype=complex)
    write_npz(path, times=trace.times, fields=fields, p=trace.p, r_max=trace.grid.r_max,
              n=trace.grid.n, nonlinearity=trace.nonlinearity,
              potential=json.dumps(trace.potential))


def load_fields(path) -> StoredTrace:
    import json
    with np.load(path) as z:
        grid = RadialGrid(float(z["r_max"]), int(z["n"]))
        return StoredTrace(p=float(z["p"]), grid=grid, times=np.array(z["times"]),
                           fields=list(z["fields"]), potential=json.loads(str(z["potential"])),
                           nonlinearity=float(z["nonlinearity"]))


class SplitStepper:
    """Precomputed operators for the split-step flow on one grid."""

    def __init__(self, grid: RadialGrid, V: PotentialSpec | None, p: float,
                 nonlinearity: float = 1.0):
        self.grid = grid
        self.p = float(p)
        self.r = grid.r
        self.k2 = grid.k ** 2
        self.vr = potential_samples(V, grid)
        self.has_v = bool(np.any(self.vr))
        self.g = float(nonlinearity)
        self._lin_cache = {}

    def _linear_factor(self, tau):
        f = self._lin_cache.get(tau)
        if f is None:
            if len(self._lin_cache) > 64:
                self._lin_cache.clear()
            f = np.exp(-1j * tau * self.k2)
            self._lin_cache[tau] = f
        return f

    def phase(self, w, tau):
        if self.g == 0.0 and not self.has_v:
            return w
        a2 = (w.real ** 2 + w.imag ** 2) / self.r ** 2
        rot = self.g * a2 if self.p == 3.0 else self.g * a2 ** ((self.p - 1) / 2)
        if self.has_v:
            rot = rot - self.vr
        return w * np.exp(1j * tau * rot)

    def linear(self, w, tau):
        s = fft.dst(np.stack([w.real, w.imag]), type=1, norm="ortho", axis=-1)
        f = self._linear_factor(tau)
        c = (s[0] + 1j * s[1]) * f
        s = fft.idst(np.stack([c.real, c.imag]), type=1, norm="ortho", axis=-1)
        return s[0] + 1j * s[1]

    def strang(self, w, dt):
        w = self.phase(w, 0.5 * dt)
        w = self.linear(w, dt)
        return self.phase(w, 0.5 * dt)

    def step(self, w, dt, scheme="strang"):
        for c in SCHEMES[scheme]:
            w = self.strang(w, c * dt)
        return w

    def coefficients(self, w):
        s = fft.dst(np.stack([w.real, w.imag]), type=1, norm="ortho", axis=-1)
        return s[0] ** 2 + s[1] ** 2

    def grad_sq(self, w):
        return 4 * np.pi * self.grid.h * float(np.dot(self.coefficients(w), self.k2))

    def max_rotation(self, w):
        a2 = (w.real ** 2 + w.imag ** 2) / self.r ** 2
        rate = self.g * float(np.max(a2)) ** ((self.p - 1) / 2)
        if self.has_v:
            rate += float(np.max(np.abs(self.vr)))
        return rate


def step(u: RadialField, V: PotentialSpec | None, p: float, dt: float,
         nonlinearity: float = 1.0, scheme: str = "strang") -> RadialField:
    """Advance u by one split step of size dt."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    st = SplitStepper(u.grid, V, p, nonlinearity)
    w = st.step(u.grid.r * u.values, dt, scheme)
    if not np.all(np.isfinite(w)):
        from .errors import Underresolved
        raise Underresolved("non-finite values after step")
    return RadialField(u.grid, w / u.grid.r)


def _record(trace, st, w, t, dt, V_samples, cfg, weights, V):
    grid = st.grid
    u = w / grid.r
    a2 = u.real ** 2 + u.imag ** 2
    c2 = st.coefficients(w)
    G = 4 * np.pi * grid.h * float(np.dot(c2, st.k2))
    snap = snapshot_values(u, grid, V_samples, st.p, t, grad_sq=G)
    trace.snapshots.append(snap)
    trace.dts.append(dt)
    r = grid.r
    trace.localized_mass.append(integrate3d(np.where(r <= cfg.R_probe, a2, 0.0), grid))
    rn = 0.5 * t ** (1.0 / 3.0)
    trace.lp1_radius.append(rn)
    trace.localized_lp1.append(integrate3d(np.where(r <= rn, a2 ** ((st.p + 1) / 2), 0.0), grid))
    m0 = trace.snapshots[0].mass
    wall = integrate3d(np.where(r >= cfg.wall_zone * grid.r_max, a2, 0.0), grid)
    trace.wall_mass.append(wall / m0 if m0 > 0 else 0.0)
    tot = float(np.sum(c2))
    trace.spectral_tail.append(float(np.sum(c2[2 * grid.n // 3:])) / tot if tot > 0 else 0.0)
    lp = a2 ** ((st.p + 1) / 2)
    for R in cfg.morawetz_radii:
        trace.interior_lp1.setdefault(R, []).append(integrate3d(np.where(r <= R / 2, lp, 0.0), grid))
    if cfg.store_fields:
        trace.fields.append(u.copy())
    if weights:
        from .virial import virial_eval
        field_u = RadialField(grid, u)
        for wt in weights:
            trace.virial_series.setdefault(wt.key, []).append(virial_eval(field_u, V, st.p, wt, st.g))
    return G


def evolve(u0: RadialField, V: PotentialSpec | None, p: float, cfg: EvolveConfig,
           weights=(), nonlinearity: float = 1.0) -> EvolutionTrace:
    """Run the split-step flow from u0 until t_end, blow-up detection or breakdown.

    dt is halved whenever grad_sq has grown fourfold since the last halving,
    and each step is additionally shortened so the nonlinear phase rotation
    stays below ``cfg.max_phase``.  Blow-up is declared when grad_sq reaches
    ``blowup_factor`` times its initial value or the step falls below
    ``dt_floor``.
    """
    grid = u0.grid
    st = SplitStepper(grid, V, p, nonlinearity)
    trace = EvolutionTrace(p=float(p), grid=grid, config=cfg, nonlinearity=float(nonlinearity),
                           potential=None if V is None else V.to_dict())
    w = grid.r * u0.values
    t = 0.0
    dt = cfg.dt0
    G0 = _record(trace, st, w, t, dt, st.vr, cfg, weights, V)
    last_halving = G0
    nsteps = 0
    terminal = None
    eps = 1e-12 * cfg.t_end
    while t < cfg.t_end - eps:
        d = min(dt, cfg.t_end - t)
        if cfg.max_phase is not None:
            rate = st.max_rotation(w)
            if rate > 0:
                d = min(d, cfg.max_phase / rate)
        w_new = st.step(w, d, cfg.scheme)
        if not np.all(np.isfinite(w_new)):
            terminal = Terminal(UNDERRESOLVED, t, "non-finite values after step")
            break
        w = w_new
        t += d
        nsteps += 1
        G = st.grad_sq(w)
        if last_halving > 0 and G >= 4 * last_halving:
            dt *= 0.5
            last_halving = G
        blown = G >= cfg.blowup_factor * G0 if G0 > 0 else False
        stiff = min(dt, d) < cfg.dt_floor
        done = t >= cfg.t_end - eps
        if blown or stiff or done or nsteps % cfg.store_every == 0:
            _record(trace, st, w, t, d, st.vr, cfg, weights, V)
        if blown or stiff:
            why = (f"grad_sq reached {G / G0:.4g} x initial" if blown
                   else f"time step {min(dt, d):.3g} below floor {cfg.dt_floor:g}")
            terminal = Terminal(BLOWUP, t, why)
            break
    trace.steps = nsteps
    trace.terminal = terminal or Terminal(COMPLETED, t, "reached t_end")
    trace.final_field = RadialField(grid, w / grid.r)
    return trace


@dataclass(frozen=True)
class ScatteringVerdict:
    status: str
    min_localized_mass: float
    eps_sq: float
    lp1_min_fraction: float
    valid_until: float
    reasons: tuple = ()

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self):
        return {"status": self.status, "min_localized_mass": self.min_localized_mass,
                "eps_sq": self.eps_sq, "lp1_min_fraction": self.lp1_min_fraction,
                "valid_until": self.valid_until, "reasons": list(self.reasons)}


def scattering_diagnostic(trace: EvolutionTrace, R: float | None = None, eps: float | None = None,
                          mass_fraction: float | None = None, lp1_fraction: float = 0.1,
                          min_snapshots: int = 16) -> ScatteringVerdict:
    """Localized-mass and potential-energy evacuation test on a completed run.

    Passes when the localized mass within R over the last half of the run
    drops to eps^2 (or ``mass_fraction`` times the initial mass) and the
    L^{p+1} mass inside R_n = t_n^{1/3}/2, also over the last half, falls to
    ``lp1_fraction`` of the initial L^{p+1} mass.  If radiation reaches the
    wall, only the window before the wall-contamination time counts.
    """
    if trace.terminal is None or trace.terminal.kind != COMPLETED:
        raise ValidationError("scattering diagnostic needs a run that completed its horizon")
    if R is not None and not np.isclose(R, trace.config.R_probe):
        raise ValidationError(f"trace records localized mass for R = {trace.config.R_probe}, not {R}")
    if (eps is None) == (mass_fraction is None):
        raise ValidationError("give exactly one of eps or mass_fraction")
    m0 = trace.snapshots[0].mass
    eps_sq = float(eps ** 2 if eps is not None else mass_fraction * m0)
    times = trace.times
    wc = trace.wall_contamination_time
    valid = times < wc if wc is not None else np.ones(len(times), dtype=bool)
    t_valid = float(wc if wc is not None else times[-1])
    late = valid & (times >= 0.5 * t_valid)
    loc = np.asarray(trace.localized_mass)
    # R_0 = 0, so the schedule is compared with the full initial L^{p+1} mass
    lp0 = trace.snapshots[0].lp1
    lp_late = np.asarray(trace.localized_lp1)[late]
    lp_frac = float(np.min(lp_late) / lp0) if lp0 > 0 and late.any() else float("nan")
    min_loc = float(np.min(loc[late])) if late.any() else float("nan")
    reasons = []
    if wc is not None:
        reasons.append(f"wall contamination from t = {wc:.4g}; judged on [0, {wc:.4g})")
    if late.sum() < min_snapshots:
        reasons.append(f"only {int(late.sum())} valid snapshots in the last half (need {min_snapshots})")
        return ScatteringVerdict("inconclusive", min_loc, eps_sq, lp_frac, t_valid, tuple(reasons))
    ok_mass = min_loc <= eps_sq
    ok_lp = lp_frac <= lp1_fraction
    if not ok_mass:
        reasons.append(f"localized mass stays above eps^2: {min_loc:.4g} > {eps_sq:.4g}")
    if not ok_lp:
        reasons.append(f"interior L^(p+1) mass fraction {lp_frac:.3g} > {lp1_fraction:g}")
    return ScatteringVerdict("pass" if ok_mass and ok_lp else "fail", min_loc, eps_sq, lp_frac,
                             t_valid, tuple(reasons))
