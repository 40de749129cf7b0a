"""Multi-bump initial data, perturbation calibration and verification runs."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .characteristics import (InitialData, blowup_detect, h_compute, initial_centers,
                              lagrangian_flow, solve_characteristics, track_steepest)
from .errors import BlowupError, ConfigurationError, NumericalFailure
from .profiles import Profile, profile_all
from .selfsim import (FieldSampler, Frame, MonitorConstants, MonitorLedger, NormConfig,
                      bootstrap_monitor, bootstrap_observations, energy_inequality_check,
                      energy_terms, evolution_residual, fit_constants, norm_of_function,
                      support_bounds_check, take_snapshot, transport_lower_bound_margin)

log = logging.getLogger(__name__)

SUPPORT_LO, SUPPORT_HI = 4.0 / 3.0, 5.0 / 3.0


# -- perturbation -----------------------------------------------------------------

def bump(x, center: float, halfwidth: float, amplitude: float = 1.0):
    """Smooth bump ``A exp(1 - 1/(1 - z^2))`` on ``|z| < 1``, ``z = (x - c)/w``; peak ``A``."""
    x = np.asarray(x, dtype=float)
    z = (x - center) / halfwidth
    inside = np.abs(z) < 1.0
    out = np.zeros_like(x)
    zi = z[inside]
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - zi * zi))
    return out


def bump_deriv(x, center: float, halfwidth: float, amplitude: float = 1.0):
    x = np.asarray(x, dtype=float)
    z = (x - center) / halfwidth
    inside = np.abs(z) < 1.0
    out = np.zeros_like(x)
    zi = z[inside]
    one = 1.0 - zi * zi
    out[inside] = amplitude * np.exp(1.0 - 1.0 / one) * (-2.0 * zi / one**2) / halfwidth
    return out


@dataclass(frozen=True)
class PerturbationSpec:
    """Compact smooth perturbation of the initial data.

    ``center`` and ``halfwidth`` are in units of ``delta^{1/(2 i_1)}``;
    ``theta`` is the target norm as a fraction of ``delta^{1/2 - kappa}``.
    ``amplitude`` (physical units) is filled in by calibration when ``None``.
    """

    shape: str = "bump"
    center: float = 1.5
    halfwidth: float = 1.0 / 6.0
    theta: float = 0.5
    amplitude: Optional[float] = None

    def __post_init__(self):
        if self.shape not in ("bump", "none"):
            raise ConfigurationError(f"unknown perturbation shape {self.shape!r}")
        if self.halfwidth <= 0:
            raise ConfigurationError("perturbation halfwidth must be positive")

    @property
    def active(self) -> bool:
        return self.shape != "none" and self.amplitude != 0.0 and self.theta != 0.0

    def interval(self, unit: float):
        return (self.center - self.halfwidth) * unit, (self.center + self.halfwidth) * unit


@dataclass(frozen=True)
class Scenario:
    """Full description of one verification run."""

    name: str = "scenario"
    i_list: tuple = (1,)
    delta: float = 1e-4
    T: float = 1.0
    kappa: float = 0.05
    q: int = 10
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    s_span: float = 3.0
    seed: int = 0
    L: Optional[int] = None
    # grids
    n_s: int = 16
    n_x: int = 256
    blowup_grid: int = 65536
    n_lagrangian: int = 32
    n_track: int = 4
    # tolerances
    delta_max: float = 1e-2
    quad_rtol: float = 1e-10
    ds: float = 1e-4
    energy_h: float = 1e-3
    energy_C_max: float = 10.0
    simultaneity_rtol: float = 1e-10
    blowup_time_rtol: float = 1e-2
    fit_factor: float = 2.0
    K0: Optional[float] = None
    K1: Optional[float] = None
    K_eps: Optional[float] = None
    K_deps: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "i_list", tuple(int(i) for i in self.i_list))
        if self.L is None:
            object.__setattr__(self, "L", len(self.i_list))

    # derived quantities
    @property
    def i1(self) -> int:
        return self.i_list[0]

    @property
    def i_m(self) -> int:
        return max(self.i_list)

    @property
    def alpha1(self) -> float:
        return Profile(self.i1).alpha

    @property
    def unit(self) -> float:
        """``delta^{1/(2 i_1)}``, the physical length of the bump spacing."""
        return self.delta ** (1.0 / (2 * self.i1))

    @property
    def y0s(self) -> list:
        return initial_centers(self.i_list, self.delta)

    @property
    def s0(self) -> float:
        return -math.log(self.delta)

    def validate(self):
        if self.L != len(self.i_list) or self.L < 1:
            raise ConfigurationError(f"L={self.L} does not match i_list {self.i_list}")
        for i in self.i_list:
            if i < 1:
                raise ConfigurationError("profile indices must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if not 0.0 < self.kappa < 0.5:
            raise ConfigurationError("kappa must lie in (0, 1/2)")
        if self.q < 1:
            raise ConfigurationError("q must be a positive integer")
        if self.s_span <= 0:
            raise ConfigurationError("s_span must be positive")
        p = self.perturbation
        if p.shape != "none":
            lo, hi = p.center - p.halfwidth, p.center + p.halfwidth
            slack = 1e-12
            if lo < SUPPORT_LO - slack or hi > SUPPORT_HI + slack:
                raise ConfigurationError(
                    f"perturbation support [{lo:.6g}, {hi:.6g}] (units of delta^(1/(2 i_1))) "
                    f"leaves [4/3, 5/3]")
            if not 0.0 <= p.theta < 1.0:
                raise ConfigurationError("theta must lie in [0, 1)")
        return self

    def frame(self) -> Frame:
        return Frame(T=self.T, delta=self.delta, i_list=self.i_list,
                     hs=tuple(h_compute(self.i_list, self.delta)), y0s=tuple(self.y0s))

    def constants(self) -> MonitorConstants:
        return MonitorConstants(K0=self.K0, K1=self.K1, K_eps=self.K_eps, K_deps=self.K_deps,
                                kappa=self.kappa)

    def norm_config(self) -> NormConfig:
        return NormConfig(i1=self.i1, q=self.q, rtol=self.quad_rtol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["i_list"] = list(self.i_list)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


# -- initial data -------------------------------------------------------------------

def profile_sum_data(i_list: Sequence[int], delta: float, y0s: Sequence[float]):
    """``u0 = sum_l delta^{1/(2 i_l)} Psi_{i_l}((x - y_{l,0}) delta^{-a_l})`` and ``u0'``."""
    profiles = [Profile(i) for i in i_list]

    def u0(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for y, p in zip(y0s, profiles):
            psi, _, _ = profile_all(p, (x - y) * delta ** (-p.alpha))
            out = out + delta ** (1.0 / (2 * p.i)) * psi
        return out

    def du0(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for y, p in zip(y0s, profiles):
            _, d1, _ = profile_all(p, (x - y) * delta ** (-p.alpha))
            out = out + d1 / delta
        return out

    return u0, du0


def _support_hint(sc: Scenario):
    unit = sc.unit
    y_last = sc.y0s[-1]
    return (-1.5 * unit, y_last + 1.5 * unit)


def build_initial_data(sc: Scenario, with_perturbation: bool = True) -> InitialData:
    """Profile sum at ``t0 = T - delta`` plus the calibrated compact perturbation."""
    sc.validate()
    u0, du0 = profile_sum_data(sc.i_list, sc.delta, sc.y0s)
    p = sc.perturbation
    length = min(sc.delta ** Profile(i).alpha for i in sc.i_list)
    if with_perturbation and p.active:
        if p.amplitude is None:
            raise ConfigurationError("perturbation amplitude not calibrated")
        c, w, A = p.center * sc.unit, p.halfwidth * sc.unit, p.amplitude

        def ev(x):
            return u0(x) + bump(x, c, w, A)

        def de(x):
            return du0(x) + bump_deriv(x, c, w, A)

        return InitialData(sc.T - sc.delta, ev, de, _support_hint(sc), length_scale=length)
    return InitialData(sc.T - sc.delta, u0, du0, _support_hint(sc), length_scale=length)


def initial_perturbation_norm(sc: Scenario, amplitude: float) -> float:
    """Weighted norm of the perturbation at ``s = -log delta`` for a given amplitude."""
    p = sc.perturbation
    cfg = sc.norm_config()
    fr_scale = sc.delta ** (-1.0 / (2 * sc.i1))  # e^{s0/(2 i1)}
    to_x = sc.delta ** sc.alpha1
    c, w = p.center * sc.unit, p.halfwidth * sc.unit
    support = ((c - w) / to_x, (c + w) / to_x)

    def eps0(X):
        return fr_scale * bump(X * to_x, c, w, amplitude)

    return norm_of_function(eps0, support, cfg)


def calibrate_perturbation(sc: Scenario, theta: Optional[float] = None, rtol: float = 1e-12) -> PerturbationSpec:
    """Amplitude giving initial norm ``theta * delta^{1/2 - kappa}``, found by bisection."""
    p = sc.perturbation
    theta = p.theta if theta is None else theta
    if not 0.0 <= theta < 1.0:
        raise ValueError("theta must lie in [0, 1)")
    if theta == 0.0:
        return replace(p, amplitude=0.0, theta=0.0)
    target = theta * sc.delta ** (0.5 - sc.kappa)
    unit_norm = initial_perturbation_norm(sc, 1.0)
    guess = target / unit_norm  # homogeneity
    lo, hi = 0.5 * guess, 2.0 * guess
    f_lo = initial_perturbation_norm(sc, lo) - target
    f_hi = initial_perturbation_norm(sc, hi) - target
    assert f_lo < 0 < f_hi, "weighted norm is not monotone in the amplitude"
    amp = brentq(lambda a: initial_perturbation_norm(sc, a) - target, lo, hi, xtol=1e-300, rtol=rtol)
    return replace(p, amplitude=amp, theta=theta)


def calibrated(sc: Scenario) -> Scenario:
    """Scenario with the perturbation amplitude filled in."""
    p = sc.perturbation
    if p.shape == "none" or p.amplitude is not None:
        return sc
    return replace(sc, perturbation=calibrate_perturbation(sc))


# -- verification run -----------------------------------------------------------------

@dataclass
class Check:
    """One named claim with its measured value and the threshold it is held to.

    ``value`` and ``threshold`` are oriented so that ``passed`` is the
    comparison the tag describes; ``where`` lists offending ``s`` values.
    """

    tag: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    where: list = field(default_factory=list)

    def __post_init__(self):
        self.passed = bool(self.passed)
        for name in ("value", "threshold"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))
        self.where = [float(s) for s in self.where]


@dataclass
class DiagnosticsReport:
    """Everything a verification run measured, with its verdict."""

    scenario: dict
    digest: str
    checks: list
    ledger: MonitorLedger
    constants: MonitorConstants
    constants_source: str
    blowup: Optional[BlowupReport] = None
    energy: Optional[dict] = None
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def check(self, tag: str) -> Check:
        for c in self.checks:
            if c.tag == tag:
                return c
        raise KeyError(tag)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        blow = None
        if self.blowup is not None:
            blow = {"t_star": self.blowup.t_star, "points": list(self.blowup.points),
                    "slopes": list(self.blowup.slopes), "basins": self.blowup.basins}
        return _jsonable({
            "scenario": self.scenario,
            "digest": self.digest,
            "verdict": self.verdict,
            "failed": [c.tag for c in self.failures()],
            "checks": [asdict(c) for c in self.checks],
            "constants": self.constants.as_dict(),
            "constants_source": self.constants_source,
            "blowup": blow,
            "energy": self.energy,
            "extras": self.extras,
            "ledger": self.ledger.rows,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def s_grid(sc: Scenario) -> np.ndarray:
    return np.linspace(sc.s0, sc.s0 + sc.s_span, sc.n_s)


def make_sampler(sc: Scenario, data: Optional[InitialData] = None, t_star: Optional[float] = None):
    """Field sampler for a calibrated scenario (perturbation taken relative to the bare profile sum)."""
    sc = calibrated(sc)
    data = build_initial_data(sc) if data is None else data
    p = sc.perturbation
    reference, ref_t_star, support = None, None, None
    if p.active:
        support = p.interval(sc.unit)
        if sc.L > 1:
            reference = build_initial_data(sc, with_perturbation=False)
            ref_t_star = blowup_detect(reference, n_scan=sc.blowup_grid).t_star
    elif sc.L > 1:
        reference, ref_t_star = data, t_star
    if t_star is None:
        t_star = blowup_detect(data, n_scan=sc.blowup_grid).t_star
    return FieldSampler(sc.frame(), data, reference, support, t_star, ref_t_star)


def _blowup_checks(sc: Scenario, data: InitialData, rep: BlowupReport, frame: Frame) -> tuple:
    checks = []
    checks.append(Check("blowup-count", len(rep.points) == sc.L, float(len(rep.points)), float(sc.L),
                        "caustic points found at the first blowup time"))
    earliest = sorted(b["t_blowup"] for b in rep.basins)[:sc.L]
    spread = (earliest[-1] - earliest[0]) if len(earliest) == sc.L else math.inf
    checks.append(Check("blowup-simultaneity", spread <= sc.simultaneity_rtol * sc.delta, spread,
                        sc.simultaneity_rtol * sc.delta,
                        "spread of the L earliest basin blowup times"))
    dt = abs(rep.t_star - sc.T)
    checks.append(Check("blowup-time", dt <= sc.blowup_time_rtol * sc.delta, dt,
                        sc.blowup_time_rtol * sc.delta, "|t_star - T|"))
    # the frame follows bump 1, which is carried by the characteristic through 0
    shift = sc.delta * float(data.eval(np.array([0.0]))[0])
    expected = [y + shift for y in frame.centers_x(sc.T)]
    tol = sc.delta ** sc.alpha1
    # each of the L earliest basins, advanced to its own blowup time
    first = sorted(rep.basins, key=lambda b: b["t_blowup"])[:sc.L]
    located = sorted(b["xi"] + (b["t_blowup"] - data.t0) * float(data.eval(np.array([b["xi"]]))[0])
                     for b in first)
    if len(located) == sc.L:
        err = max(abs(x - e) for x, e in zip(located, expected))
    else:
        err = math.inf
    checks.append(Check("blowup-location", err <= tol, err, tol,
                        "caustic points against the drifting centre positions"))
    return checks, {"expected_points": expected, "located_points": located, "location_error": err, "time_spread": spread}


def _drift_checks(sc: Scenario, data: InitialData, frame: Frame) -> list:
    hs = list(frame.hs)
    ok = all(hs[l] < hs[l - 1] for l in range(1, len(hs))) and all(h < 0 for h in hs[1:])
    ref = build_initial_data(sc, with_perturbation=False) if not sc.perturbation.active else data
    y0 = np.asarray(sc.y0s)
    direct = ref.eval(y0) - float(ref.eval(np.array([0.0]))[0])
    err = float(np.max(np.abs(direct - np.asarray(hs)))) if len(hs) else 0.0
    # the compact perturbation vanishes at the centres, so the perturbed data agrees too
    pert_err = float(np.max(np.abs(data.eval(y0) - float(data.eval(np.array([0.0]))[0])
                                   - np.asarray(hs))))
    return [
        Check("drift-sign-monotone", ok, None, None, f"h = {hs}"),
        Check("drift-definition", max(err, pert_err) <= 1e-12, max(err, pert_err), 1e-12,
              "h_l against u0(y_l0) - u0(0)"),
        Check("delta-small", sc.delta < sc.delta_max, sc.delta, sc.delta_max, "delta < delta_max"),
        Check("centre-absorption",
              sc.delta * max(abs(h) for h in hs) < sc.unit / 4,
              sc.delta * max(abs(h) for h in hs), sc.unit / 4,
              "total centre drift against a quarter of the bump spacing"),
    ]


def _lagrangian(sc: Scenario, sampler: FieldSampler, grid: np.ndarray) -> dict:
    """Trajectories of seeded points of the initial perturbation support."""
    fr = sampler.frame
    support = sampler.support(sc.s0)
    if support is None:
        return {"margin": math.inf, "oracle_error": 0.0, "n": 0}
    rng = np.random.default_rng(sc.seed)
    X0 = np.sort(rng.uniform(support[0], support[1], sc.n_lagrangian))
    a1 = fr.alpha1
    data = sampler.data

    def velocity(s, X):
        t = fr.t_of_s(s)
        x = np.atleast_1d(X * math.exp(-a1 * s))
        u, _, _ = solve_characteristics(data, t, x, t_star=sampler.t_star,
                                        elapsed=fr.delta - math.exp(-s))
        return a1 * X + math.exp((a1 - 1.0) * s) * float(u[0])

    margin, oracle = math.inf, 0.0
    lo_box = np.exp(grid)
    hi_box = 2.0 * sc.unit * np.exp(a1 * grid)
    for X in X0:
        phi = lagrangian_flow(velocity, float(X), sc.s0, grid)
        margin = min(margin, float(np.min((phi - lo_box) / lo_box)), float(np.min((hi_box - phi) / hi_box)))
        x0 = float(X) * math.exp(-a1 * sc.s0)
        exact = np.exp(a1 * grid) * (x0 + (fr.delta - np.exp(-grid)) * float(data.eval(np.array([x0]))[0]))
        oracle = max(oracle, float(np.max(np.abs(phi - exact) / np.abs(exact))))
    return {"margin": margin, "oracle_error": oracle, "n": int(len(X0))}


def _tracking(sc: Scenario, data: InitialData, frame: Frame, t_star: float, s_end: float) -> float:
    """Largest deviation of the tracked steepest points from the centre trajectories."""
    times = np.linspace(frame.t0, frame.t_of_s(s_end), sc.n_track)
    u00 = float(data.eval(np.array([0.0]))[0])
    worst = 0.0
    for t in times:
        expected = frame.centers_x(t)
        half = 0.5 * sc.unit
        try:
            found = [track_steepest(data, t, (e - half, e + half), t_star=t_star)[0] for e in expected]
        except NumericalFailure:
            return math.inf
        for l, x in enumerate(found):
            if l == 0:
                err = abs(x - (t - frame.t0) * u00)
            else:
                err = abs((x - found[0]) - expected[l])
            worst = max(worst, err)
    return worst


def _margin_check(tag: str, rows: list, key: str, detail: str) -> Check:
    values = [r[key] for r in rows]
    bad = [r["s"] for r in rows if r[key] < 0]
    return Check(tag, not bad, min(values) if values else math.inf, 0.0, detail, bad)


def run_verification(sc: Scenario) -> DiagnosticsReport:
    """Run the full monitor suite on one scenario.

    Builds the data, locates the caustics, samples the perturbation over the
    ``s``-grid and checks every bound.  Bootstrap constants that the scenario
    leaves unset are fitted from this run (``fit_factor`` times the observed
    peak) and then held fixed for the margins.
    """
    sc = calibrated(sc.validate())
    log.info("verification %s (%s)", sc.name, sc.digest())
    data = build_initial_data(sc)
    frame = sc.frame()
    rep = blowup_detect(data, n_scan=sc.blowup_grid, simultaneity_rtol=sc.simultaneity_rtol)
    checks, blow_extra = _blowup_checks(sc, data, rep, frame)
    checks += _drift_checks(sc, data, frame)

    sampler = make_sampler(sc, data, rep.t_star)
    cfg = sc.norm_config()
    grid = s_grid(sc)
    # monitors need the solution (and the s + ds, s + h stencils) strictly before the caustic
    reach = sc.s0 + sc.s_span + max(sc.ds, sc.energy_h)
    regular = rep.t_star > frame.t_of_s(reach)
    if not regular:
        s_stop = frame.s_of_t(rep.t_star) - 2 * max(sc.ds, sc.energy_h)
        grid = grid[grid < s_stop]
    checks.append(Check("regular-over-run", regular, rep.t_star, frame.t_of_s(reach),
                        "first blowup time against the end of the monitored window",
                        [] if regular else [float(s_stop)]))
    rows, residuals = [], []
    for s in grid:
        snap = take_snapshot(sampler, float(s), n=sc.n_x, scenario_ref=sc.digest())
        lo_m, hi_m = support_bounds_check(snap, frame)
        obs = bootstrap_observations(snap, cfg)
        r1 = evolution_residual(sampler, float(s), sc.ds, n=sc.n_x)
        r2 = evolution_residual(sampler, float(s), sc.ds / 2, n=sc.n_x)
        ratio = r2["residual"] / r1["residual"] if r1["residual"] > 0 else math.nan
        residuals.append({"s": float(s), "residual": r1["residual"], "residual_half": r2["residual"],
                          "ratio": ratio, "status": r2["status"]})
        sup = snap.support or (None, None)
        rows.append({"s": float(s), "supp_lo": sup[0], "supp_hi": sup[1],
                     "margin_support_lower": lo_m, "margin_support_upper": hi_m,
                     "margin_transport": transport_lower_bound_margin(frame, float(s), sc.n_x),
                     "residual_evo": r1["residual"], **obs})

    frozen = all(getattr(sc, k) is not None for k in ("K0", "K1", "K_eps", "K_deps"))
    constants = sc.constants() if frozen else fit_constants(rows, sc.kappa, sc.fit_factor)
    ledger = MonitorLedger(constants=constants)

    samples = []
    for row in rows:
        s = max(row["s"], sc.s0 + sc.energy_h)
        ref = row["norm_eps"]
        Em, _ = energy_terms(sampler, s - sc.energy_h, cfg, ref)
        E, F = energy_terms(sampler, s, cfg, ref)
        Ep, _ = energy_terms(sampler, s + sc.energy_h, cfg, ref)
        samples.append({"s": s, "h": sc.energy_h, "E_minus": Em, "E": E, "E_plus": Ep, "F": F})
    energy = energy_inequality_check(samples, sc.q, sc.energy_C_max)

    for row, e_row in zip(rows, energy["per_s"]):
        full = bootstrap_monitor(None, cfg, constants, observed=row, s=row["s"])
        full.update({k: v for k, v in row.items() if k not in full})
        full["margin_energy"] = e_row["margin"]
        ledger.append(full)
    L_rows = ledger.rows

    checks += [
        _margin_check("support-lower", L_rows, "margin_support_lower", "perturbation support stays right of e^s"),
        _margin_check("support-upper", L_rows, "margin_support_upper",
                      "perturbation support stays left of 2 delta^(1/(2 i1)) e^(a1 s)"),
        _margin_check("bootstrap-norm", L_rows, "margin_norm_eps", "weighted norm of eps decays"),
        _margin_check("bootstrap-scaled-norm", L_rows, "margin_norm_Aeps",
                      "weighted norm of the transported derivative decays"),
        _margin_check("bootstrap-pointwise", L_rows, "margin_sup_eps_over_X", "sup |eps|/X decays"),
        _margin_check("bootstrap-gradient", L_rows, "margin_sup_deps", "sup |d_X eps| decays"),
        _margin_check("transport-lower-bound", L_rows, "margin_transport", "transport speed exceeds X"),
        Check("energy-inequality", energy["passed"], energy["C_fit"], sc.energy_C_max,
              "fitted constant of the energy inequality",
              [m["s"] for m in energy["per_s"] if m["C_needed"] > sc.energy_C_max]),
    ]

    bad_ratio = [r["s"] for r in residuals
                 if r["status"] == "ok" and not abs(r["ratio"] - 0.5) <= 0.1]
    worst = max((abs(r["ratio"] - 0.5) for r in residuals if r["status"] == "ok"), default=0.0)
    checks.append(Check("evolution-first-order", not bad_ratio, worst, 0.1,
                        "|residual(ds/2)/residual(ds) - 1/2|", bad_ratio))

    p = sc.perturbation
    if p.active:
        target = p.theta * sc.delta ** (0.5 - sc.kappa)
        cal = abs(L_rows[0]["norm_eps"] / target - 1.0)
        checks.append(Check("perturbation-calibration", cal <= 0.01, cal, 0.01,
                            "initial weighted norm against theta delta^(1/2 - kappa)"))

    if not rows:
        raise BlowupError("no monitored time precedes the first blowup")
    lag = _lagrangian(sc, sampler, grid)
    checks.append(Check("lagrangian-support", lag["margin"] >= 0, lag["margin"], 0.0,
                        "sampled trajectories stay in the confining box"))
    checks.append(Check("lagrangian-oracle", lag["oracle_error"] <= 1e-6, lag["oracle_error"], 1e-6,
                        "integrated trajectories against straight characteristics"))

    track = _tracking(sc, data, frame, rep.t_star, float(grid[-1]))
    checks.append(Check("trajectory-tracking", track <= sc.delta ** sc.alpha1, track,
                        sc.delta ** sc.alpha1, "steepest points against centre trajectories"))

    extras = {"blowup": blow_extra, "residuals": residuals, "lagrangian": lag, "tracking_error": track,
              "h": list(frame.hs), "amplitude": p.amplitude}
    report = DiagnosticsReport(scenario=sc.to_dict(), digest=sc.digest(), checks=checks, ledger=ledger,
                               constants=constants, constants_source="frozen" if frozen else "fitted",
                               blowup=rep, energy=energy, extras=extras)
    for c in report.failures():
        log.warning("%s failed: value %s threshold %s at s=%s", c.tag, c.value, c.threshold, c.where)
    return report


# -- sweeps -------------------------------------------------------------------------

SWEEP_AXES = ("delta", "i_list", "L", "kappa", "q", "theta")
WORKERS_ENV = "BURGERS_BLOWUP_WORKERS"


def expand_axes(template: Scenario, axes: dict) -> list:
    """Cartesian product of the axes applied to ``template`` (empty if any axis is empty)."""
    unknown = set(axes) - set(SWEEP_AXES)
    if unknown:
        raise ConfigurationError(f"unknown sweep axes: {sorted(unknown)}")
    names = list(axes)  # the product runs in the order the axes were given
    values = [list(axes[a]) for a in names]
    if any(len(v) == 0 for v in values):
        return []
    out = []
    for combo in itertools.product(*values):
        params = dict(zip(names, combo))
        changes = {}
        i_list = tuple(params.get("i_list", template.i_list))
        if "L" in params and "i_list" not in params:
            i_list = (i_list[0],) * int(params["L"])
        changes["i_list"] = i_list
        changes["L"] = len(i_list)
        for key in ("delta", "kappa", "q"):
            if key in params:
                changes[key] = type(getattr(template, key))(params[key])
        pert = replace(template.perturbation, amplitude=None) \
            if template.perturbation.shape != "none" else template.perturbation
        if "theta" in params:
            pert = replace(pert, theta=float(params["theta"]))
        changes["perturbation"] = pert
        label = ",".join(f"{k}={_label(v)}" for k, v in params.items())
        changes["name"] = f"{template.name}[{label}]"
        out.append((params, replace(template, **changes)))
    return out


def _label(v):
    if isinstance(v, (list, tuple)):
        return "-".join(str(x) for x in v)
    return f"{v:g}" if isinstance(v, float) else str(v)


def _run_point(sc: Scenario):
    try:
        return run_verification(sc), None
    except (BlowupError, ValueError) as exc:
        log.error("sweep point %s failed: %s", sc.name, exc)
        return None, f"{type(exc).__name__}: {exc}"


def fit_power_law(deltas, values) -> float:
    """Least-squares slope of ``log|value|`` against ``log delta``."""
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def h_scaling_table(scenarios: Sequence[Scenario], rel_tol: float = 0.15) -> list:
    """Fitted exponent of ``|h_2|`` in ``delta`` for every i-list swept over several deltas."""
    groups = {}
    for sc in scenarios:
        if sc.L >= 2:
            groups.setdefault(sc.i_list, set()).add(sc.delta)
    table = []
    for i_list, deltas in groups.items():
        if len(deltas) < 2:
            continue
        deltas = sorted(deltas)
        h2 = [h_compute(i_list, d)[1] for d in deltas]
        slope = fit_power_law(deltas, h2)
        i_m = max(i_list)
        expected = 1.0 / (2 * i_m * (2 * i_m + 1))
        table.append({"i_list": list(i_list), "n": len(deltas), "delta_min": deltas[0],
                      "delta_max": deltas[-1], "slope": slope, "expected": expected,
                      "rel_error": abs(slope / expected - 1.0),
                      "within_tolerance": abs(slope / expected - 1.0) <= rel_tol,
                      "h2": h2, "deltas": deltas})
    return table


@dataclass
class SweepReport:
    """Per-point verdicts plus the aggregated constants and scaling fits."""

    axes: dict
    points: list
    scaling: list
    reports: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(p["verdict"] == "pass" for p in self.points)

    def to_dict(self) -> dict:
        return _jsonable({"axes": self.axes, "passed": self.passed, "points": self.points,
                          "scaling": self.scaling})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    POINT_COLUMNS = ("name", "digest", "verdict", "delta", "i_list", "kappa", "q", "K0", "K1",
                     "K_eps", "K_deps", "C_fit", "h2", "failed", "error")

    def points_csv(self) -> str:
        lines = [",".join(self.POINT_COLUMNS)]
        for p in self.points:
            cells = []
            for c in self.POINT_COLUMNS:
                v = p.get(c)
                if isinstance(v, (list, tuple)):
                    v = " ".join(str(x) for x in v)
                cells.append("" if v is None else _csv_cell(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    SCALING_COLUMNS = ("i_list", "n", "delta_min", "delta_max", "slope", "expected", "rel_error",
                       "within_tolerance")

    def scaling_csv(self) -> str:
        lines = [",".join(self.SCALING_COLUMNS)]
        for row in self.scaling:
            lines.append(",".join(_csv_cell(" ".join(map(str, row[c])) if c == "i_list" else row[c])
                                  for c in self.SCALING_COLUMNS))
        return "\n".join(lines) + "\n"


def _csv_cell(v) -> str:
    text = repr(v) if isinstance(v, float) else str(v)
    return f'"{text}"' if "," in text else text


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def sweep(template: Scenario, axes: dict, workers: Optional[int] = None) -> SweepReport:
    """Run :func:`run_verification` over the product of ``axes``.

    A failing or crashing point is recorded and the sweep continues.  Points
    run in worker processes when ``workers`` (default: the environment
    variable ``BURGERS_BLOWUP_WORKERS``, else 1) exceeds one; results keep the
    axis order either way.
    """
    expanded = expand_axes(template, axes)
    axes_out = {k: [list(v) if isinstance(v, (list, tuple)) else v for v in vals]
                for k, vals in axes.items()}
    if not expanded:
        return SweepReport(axes=axes_out, points=[], scaling=[])
    scenarios = [sc for _, sc in expanded]
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(scenarios))) as pool:
            results = list(pool.map(_run_point, scenarios))
    else:
        results = [_run_point(sc) for sc in scenarios]

    points, reports = [], []
    for (params, sc), (rep, err) in zip(expanded, results):
        row = {"name": sc.name, "digest": sc.digest(), "params": params, "delta": sc.delta,
               "i_list": list(sc.i_list), "kappa": sc.kappa, "q": sc.q,
               "h2": rep.extras["h"][1] if rep is not None and sc.L >= 2 else None}
        if rep is None:
            row.update({"verdict": "error", "error": err, "failed": []})
        else:
            row.update({"verdict": rep.verdict, "error": None,
                        "failed": [c.tag for c in rep.failures()],
                        "C_fit": rep.energy["C_fit"], **rep.constants.as_dict()})
        points.append(row)
        reports.append(rep)
    valid = [sc for sc, rep in zip(scenarios, reports) if rep is not None]
    return SweepReport(axes=axes_out, points=points, scaling=h_scaling_table(valid),
                       reports=reports)
