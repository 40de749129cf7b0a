"""Exact pre-blowup solutions of ``u_t + u u_x = 0`` by characteristics.

Before the first caustic the map ``xi -> xi + (t - t0) u0(xi)`` is strictly
increasing, so ``u(t, x) = u0(xi)`` with ``xi`` its unique preimage of ``x``.
This module inverts that map, locates the caustic, and provides the bump
centre trajectories and Lagrangian flow used in the self-similar frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import BlowupProximityError, DomainError, NumericalFailure
from .profiles import Profile, profile_eval

EPS = np.finfo(float).eps
MAX_ITER = 200
DEFAULT_SCAN_POINTS = 65536


@dataclass
class InitialData:
    """Data ``u0`` prescribed at time ``t0`` together with its derivative.

    ``length_scale`` is the smallest structural length in the data; it sets
    the default clustering tolerance for blowup points.
    """

    t0: float
    eval: Callable
    deriv: Callable
    support_hint: tuple
    length_scale: Optional[float] = None
    _blowup: Optional["BlowupReport"] = field(default=None, repr=False, compare=False)

    def check_consistency(self, n: int = 64, rel: float = 1e-5) -> float:
        """Spot-check ``deriv`` against central differences; returns the worst mismatch."""
        a, b = self.support_hint
        x = np.linspace(a, b, n + 2)[1:-1]
        h = 1e-6 * (self.length_scale or (b - a))
        fd = (self.eval(x + h) - self.eval(x - h)) / (2 * h)
        d = self.deriv(x)
        scale = np.max(np.abs(d))
        err = float(np.max(np.abs(fd - d)) / scale) if scale > 0 else 0.0
        if err > rel:
            raise ValueError(f"eval/deriv mismatch {err:.2e} exceeds {rel:.1e}")
        return err


@dataclass
class BlowupReport:
    """First blowup time with the points where characteristics first cross.

    ``basins`` keeps one entry per local minimum of ``u0'`` (including the
    ones that blow up later), so simultaneity can be inspected directly.
    """

    t_star: float
    points: list
    slopes: list
    basins: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "t_star": self.t_star if math.isfinite(self.t_star) else None,
            "points": list(self.points),
            "slopes": list(self.slopes),
            "basins": self.basins,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(frozen=True)
class CenterTrajectory:
    """Distance ``y_l(t)`` between the first and the ``l``-th bump centre."""

    l: int
    y0: float
    h: float
    T: float
    delta: float

    def __post_init__(self):
        if self.l == 1 and (self.y0 != 0.0 or self.h != 0.0):
            raise ValueError("the first centre is pinned: y0 = h = 0")

    def values(self, t):
        return y_trajectory(self.l, self.y0, self.h, t, T=self.T, delta=self.delta)


# -- pointwise solver -----------------------------------------------------------

def _invert_characteristics(d: InitialData, tau: float, x: np.ndarray) -> np.ndarray:
    """Solve ``xi + tau u0(xi) = x`` elementwise by bracketed Newton."""
    if tau == 0.0:
        return x.copy()

    def g(xi):
        return xi + tau * d.eval(xi) - x

    xi = x - tau * d.eval(x)
    gx = g(xi)
    width = np.abs(tau * d.eval(x)) + np.abs(gx) + 1e-300
    lo = np.where(gx > 0, xi - width, xi)
    hi = np.where(gx > 0, xi, xi + width)
    for _ in range(MAX_ITER):
        glo, ghi = g(lo), g(hi)
        bad_lo, bad_hi = glo > 0, ghi < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = np.where(bad_lo | bad_hi, 2 * width, width)
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    else:
        raise NumericalFailure("could not bracket characteristic root", tau=tau)

    xi = np.clip(xi, lo, hi)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(MAX_ITER):
        z = xi[active]
        xa = x[active]
        uz = d.eval(z)
        gz = z + tau * uz - xa
        dg = 1.0 + tau * d.deriv(z)
        l, h = lo[active], hi[active]
        h = np.where(gz > 0, z, h)
        l = np.where(gz < 0, z, l)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = z - gz / dg
        outside = ~np.isfinite(new) | (new < l) | (new > h)
        new = np.where(outside, 0.5 * (l + h), new)
        tol = 4 * EPS * np.maximum(np.abs(new), np.abs(xa))
        # a residual at rounding level cannot be improved on, however flat g is
        noise = 4 * EPS * (np.abs(z) + np.abs(tau * uz) + np.abs(xa))
        done = (np.abs(gz) <= noise) | (np.abs(new - z) <= tol) | (h - l <= tol)
        new = np.where(np.abs(gz) <= noise, z, new)
        xi[active] = new
        lo[active] = l
        hi[active] = h
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return xi
    bad = np.flatnonzero(active)[0]
    raise NumericalFailure("characteristic Newton did not converge", x=float(x[bad]), tau=tau)


def _guard(d: InitialData, t: float, t_star: Optional[float], guard: Optional[float]):
    if t < d.t0:
        raise DomainError(f"t={t} precedes the data time t0={d.t0}")
    if t_star is None:
        t_star = blowup_detect(d).t_star
    if not math.isfinite(t_star):
        return
    if guard is None:
        guard = 1e-9 * (t_star - d.t0)
    if t > t_star - guard:
        raise BlowupProximityError(
            f"t={t!r} is within {guard:.3e} of the blowup time {t_star!r}")


def solve_characteristics(d: InitialData, t: float, x, *, t_star=None, guard=None, elapsed=None):
    """Return ``(u, u_x, xi)`` at time ``t`` for positions ``x``.

    ``u_x = u0'(xi) / (1 + (t - t0) u0'(xi))`` comes from differentiating the
    characteristic relation, not from differencing.  ``elapsed`` overrides
    ``t - t0`` when the caller knows it more accurately than the difference
    of two nearby times.
    """
    _guard(d, t, t_star, guard)
    xa = np.asarray(x, dtype=float)
    flat = xa.reshape(-1)
    tau = t - d.t0 if elapsed is None else float(elapsed)
    xi = _invert_characteristics(d, tau, flat)
    u = d.eval(xi)
    du0 = d.deriv(xi)
    ux = du0 / (1.0 + tau * du0)
    shape = xa.shape
    if xa.ndim == 0:
        return float(u[0]), float(ux[0]), float(xi[0])
    return u.reshape(shape), ux.reshape(shape), xi.reshape(shape)


def solve_pointwise(d: InitialData, t: float, x, *, t_star=None, guard=None):
    """Exact solution ``u(t, x)``; refuses times within ``guard`` of blowup."""
    return solve_characteristics(d, t, x, t_star=t_star, guard=guard)[0]


# -- blowup detection -----------------------------------------------------------

def _refine_minimum(f, xk, left, right, spacing):
    # optimise the offset from the grid point so the tolerance is relative to the
    # grid spacing, not to |x|
    res = minimize_scalar(
        lambda dx: float(f(np.array([xk + dx]))[0]),
        bounds=(left - xk, right - xk),
        method="bounded",
        options={"xatol": 1e-13 * spacing, "maxiter": 500},
    )
    if not res.success:
        raise NumericalFailure("slope minimisation failed", x=xk)
    return xk + res.x, float(res.fun)


def slope_minima(f, a: float, b: float, n: int = DEFAULT_SCAN_POINTS):
    """Local minima of ``f`` on ``[a, b]``: grid scan then bounded refinement."""
    x = np.linspace(a, b, n)
    v = f(x)
    spacing = x[1] - x[0]
    idx = np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])) + 1
    out = []
    for k in idx:
        out.append(_refine_minimum(f, x[k], x[k - 1], x[k + 1], spacing))
    return out


def blowup_detect(d: InitialData, *, n_scan: int = DEFAULT_SCAN_POINTS,
                  simultaneity_rtol: float = 1e-10,
                  cluster_tol: Optional[float] = None) -> BlowupReport:
    """Locate the first caustic of the data.

    Every local minimum of ``u0'`` defines a basin with its own blowup time
    ``t0 + 1/(-min u0')``.  The first blowup time is the earliest of these; the
    reported points are the basins whose time agrees with it to within
    ``simultaneity_rtol * (t_star - t0)``, advanced along their characteristic.
    """
    if d._blowup is not None and n_scan == DEFAULT_SCAN_POINTS and simultaneity_rtol == 1e-10 \
            and cluster_tol is None:
        return d._blowup
    a, b = d.support_hint
    minima = [(xk, v) for xk, v in slope_minima(d.deriv, a, b, n_scan) if v < 0]
    if not minima:
        report = BlowupReport(math.inf, [], [], [])
        d._blowup = report
        return report

    if cluster_tol is None:
        cluster_tol = (d.length_scale if d.length_scale else (b - a) * 1e-9) / 10
    minima.sort()
    merged = []
    for xk, v in minima:
        if merged and abs(xk - merged[-1][0]) <= cluster_tol:
            if v < merged[-1][1]:
                merged[-1] = (xk, v)
        else:
            merged.append((xk, v))

    steepest = max(-v for _, v in merged)
    t_star = d.t0 + 1.0 / steepest
    basins = []
    points, slopes = [], []
    for xk, v in merged:
        tb = d.t0 + 1.0 / (-v)
        basins.append({"xi": xk, "slope": -v, "t_blowup": tb})
        if tb - t_star <= simultaneity_rtol * (t_star - d.t0):
            points.append(float(xk + (t_star - d.t0) * d.eval(np.array([xk]))[0]))
            slopes.append(-v)
    report = BlowupReport(t_star, points, slopes, basins)
    if n_scan == DEFAULT_SCAN_POINTS and simultaneity_rtol == 1e-10:
        d._blowup = report
    return report


def track_steepest(d: InitialData, t: float, window, n: int = 4096, *, t_star=None):
    """Steepest point of ``u(t, .)`` inside ``window`` and the slope there.

    A grid scan of the exact ``u_x`` followed by bounded refinement; used as an
    independent check of the centre trajectories.
    """
    def ux(x):
        return solve_characteristics(d, t, x, t_star=t_star)[1]

    found = slope_minima(ux, window[0], window[1], n)
    if not found:
        raise NumericalFailure("no slope minimum inside window", t=t, window=tuple(window))
    return min(found, key=lambda item: item[1])


# -- centre trajectories --------------------------------------------------------

def initial_centers(i_list: Sequence[int], delta: float) -> list:
    """``y_{l,0} = 3 (l - 1) delta^{1/(2 i_1)}``."""
    base = delta ** (1.0 / (2 * i_list[0]))
    return [3.0 * l * base for l in range(len(i_list))]


def h_compute(i_list: Sequence[int], delta: float) -> list:
    """Drift speeds ``h_l = u0(y_{l,0}) - u0(0)`` of the pure profile sum."""
    if not 0.0 < delta:
        raise DomainError("delta must be positive")
    y0 = initial_centers(i_list, delta)
    hs = []
    for l, yl in enumerate(y0):
        if l == 0:
            hs.append(0.0)
            continue
        total = 0.0
        for ylp, ip in zip(y0, i_list):
            p = Profile(ip)
            amp = delta ** (1.0 / (2 * ip))
            scale = delta ** (-p.alpha)
            total += amp * (profile_eval(p, (yl - ylp) * scale) - profile_eval(p, -ylp * scale))
        hs.append(total)
    return hs


def y_trajectory(l: int, y0: float, h: float, t, *, T: float, delta: float):
    """``y_l(t) = y_{l,0} + (delta - (T - t)) h_l``."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= T):
        raise DomainError("centre trajectories are defined for t < T only")
    if l == 1:
        out = np.zeros_like(t)
    else:
        out = y0 + (delta - (T - t)) * h
    return float(out) if out.ndim == 0 else out


def Y_selfsim(l: int, s, delta: float, h: float, i1: int):
    """Centre in self-similar units, ``Y_l(s) = e^{a1 s}(delta^{a1} Y_{l,0} + (delta - e^{-s}) h_l)``."""
    s = np.asarray(s, dtype=float)
    a1 = Profile(i1).alpha
    Y0 = 3.0 * (l - 1) / delta
    out = np.exp(a1 * s) * (delta**a1 * Y0 + (delta - np.exp(-s)) * h)
    return float(out) if out.ndim == 0 else out


def Y_selfsim_ode(l: int, s_eval, delta: float, h: float, i1: int, rtol: float = 1e-12):
    """Integrate ``dY/ds = a1 Y + e^{s/(2 i1)} h`` from ``s = -log delta`` numerically."""
    a1 = Profile(i1).alpha
    s0 = -math.log(delta)
    s_eval = np.atleast_1d(np.asarray(s_eval, dtype=float))
    if np.any(s_eval < s0):
        raise DomainError("s must not precede -log(delta)")
    Y0 = 3.0 * (l - 1) / delta
    if l == 1:
        return np.zeros_like(s_eval)

    # integrate the e^{-a1 s}-scaled variable, which keeps the magnitude flat
    def rhs(s, z):
        return [np.exp(s / (2 * i1) - a1 * s) * h]

    z0 = Y0 * math.exp(-a1 * s0)
    sol = solve_ivp(rhs, (s0, float(s_eval.max())), [z0], t_eval=s_eval, method="DOP853",
                    rtol=rtol, atol=1e-14 * max(abs(z0), 1e-300))
    if not sol.success:
        raise NumericalFailure("centre ODE integration failed", message=sol.message)
    return sol.y[0] * np.exp(a1 * s_eval)


# -- Lagrangian flow ------------------------------------------------------------

def lagrangian_flow(velocity: Callable, X0: float, s_start: float, s_eval, *,
                    rtol: float = 1e-9, atol: float = 0.0) -> np.ndarray:
    """Integrate ``dPhi/ds = velocity(s, Phi)`` from ``Phi(s_start) = X0``.

    ``velocity`` is the full self-similar transport speed (profile field plus
    the perturbation).  Returns ``Phi`` on ``s_eval``.
    """
    s_eval = np.atleast_1d(np.asarray(s_eval, dtype=float))
    if np.any(s_eval < s_start):
        raise DomainError("evaluation times must not precede the start time")
    if float(s_eval.max()) == s_start:
        return np.full(s_eval.shape, float(X0))

    def rhs(s, y):
        return [float(velocity(s, y[0]))]

    sol = solve_ivp(rhs, (s_start, float(s_eval.max())), [float(X0)], t_eval=s_eval,
                    method="DOP853", rtol=rtol, atol=atol or 1e-12 * abs(X0))
    if not sol.success:
        raise NumericalFailure("Lagrangian trajectory integration failed", X0=X0,
                               message=sol.message)
    return sol.y[0]
