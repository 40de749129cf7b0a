r"""Self-similar Burgers profiles and the operators linearised around them.

The profile :math:`\Psi_i` of index ``i`` is the odd, decreasing solution of

.. math::

    -\frac{1}{2i}\Psi + \alpha X \Psi' + \Psi \Psi' = 0,
    \qquad \alpha = 1 + \frac{1}{2i},

normalised by :math:`\Psi'(0) = -1`.  It is the real root of the implicit
relation :math:`X = -\Psi - \Psi^{2i+1}`, which is what :func:`profile_eval`
solves.  Derivatives come from differentiating that relation, so no finite
differences enter any returned value.

Everything here is vectorised over ``X`` and free of shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .errors import NumericalFailure

EPS = np.finfo(float).eps
MAX_NEWTON_ITER = 200


def _as_output(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class Profile:
    """Self-similar profile of index ``i`` (blowup of order ``2i + 1``)."""

    i: int

    def __post_init__(self):
        if isinstance(self.i, bool) or int(self.i) != self.i or self.i < 1:
            raise ValueError(f"profile index must be a positive integer, got {self.i!r}")
        object.__setattr__(self, "i", int(self.i))

    @property
    def alpha_exact(self) -> Fraction:
        return Fraction(2 * self.i + 1, 2 * self.i)

    @property
    def alpha(self) -> float:
        return float(self.alpha_exact)

    @property
    def order(self) -> int:
        """Odd power ``2i + 1`` in the implicit relation."""
        return 2 * self.i + 1

    def __call__(self, X):
        return profile_eval(self, X)


@dataclass(frozen=True)
class EigenfunctionSpec:
    """Eigenfunction ``phi_j = Psi^j dPsi`` of the operator linearised around ``Psi_i1``."""

    j: int
    i1: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("eigenfunction index j must be nonnegative")
        Profile(self.i1)

    @property
    def lambda_exact(self) -> Fraction:
        return Fraction(self.j - 2 * self.i1 - 1, 2 * self.i1)

    @property
    def lambda_j(self) -> float:
        return float(self.lambda_exact)

    @property
    def profile(self) -> Profile:
        return Profile(self.i1)


@dataclass(frozen=True)
class OperatorContext:
    """Frozen self-similar time ``s`` with the bump centres ``Y_l`` (X-units).

    The first centre is pinned at the origin.
    """

    s: float
    centers: tuple
    profiles: tuple

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        profiles = tuple(p if isinstance(p, Profile) else Profile(p) for p in self.profiles)
        if not centers:
            raise ValueError("at least one centre is required")
        if len(centers) != len(profiles):
            raise ValueError(
                f"{len(centers)} centres but {len(profiles)} profiles")
        if centers[0] != 0.0:
            raise ValueError("the first centre must be exactly 0")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "profiles", profiles)

    @property
    def base(self) -> Profile:
        return self.profiles[0]


def _solve_implicit(i: int, X: np.ndarray) -> np.ndarray:
    """Safeguarded Newton for ``psi + psi**n + X = 0``, ``n = 2i + 1``."""
    n = 2 * i + 1
    ax = np.abs(X)
    # psi -> psi + psi**n is increasing, and the root lies between 0 and
    # -sign(X) * min(|X|, |X|**(1/n)).
    bound = np.minimum(ax, ax ** (1.0 / n))
    lo = np.where(X > 0, -bound, 0.0)
    hi = np.where(X > 0, 0.0, bound)
    psi = np.where(ax <= 1.0, -X, -np.sign(X) * ax ** (1.0 / n))
    psi = np.clip(psi, lo, hi)

    active = np.ones(X.shape, dtype=bool)
    for _ in range(MAX_NEWTON_ITER):
        p = psi[active]
        x = X[active]
        g = p + p**n + x
        dg = 1.0 + n * p ** (n - 1)
        l, h = lo[active], hi[active]
        h = np.where(g > 0, p, h)
        l = np.where(g < 0, p, l)
        new = p - g / dg
        outside = (new < l) | (new > h)
        new = np.where(outside, 0.5 * (l + h), new)
        done = (g == 0) | (np.abs(new - p) <= 2 * EPS * np.abs(new)) | (h - l <= 2 * EPS * np.abs(new))
        new = np.where(g == 0, p, new)
        psi[active] = new
        lo[active] = l
        hi[active] = h
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return psi
    bad = np.flatnonzero(active)[0]
    raise NumericalFailure("profile root-finder did not converge", X=float(X[bad]), i=i)


def _values(p: Profile, X):
    Xa = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(Xa)):
        raise ValueError("profile arguments must be finite")
    flat = Xa.reshape(-1)
    # solve on |X| so that oddness holds bit for bit
    psi = np.sign(flat) * _solve_implicit(p.i, np.abs(flat))
    return psi.reshape(Xa.shape)


def profile_eval(p: Profile, X):
    """Return ``Psi_i(X)`` (scalar in, scalar out; arrays elementwise)."""
    return _as_output(_values(p, X), X)


def profile_all(p: Profile, X):
    """Return ``(Psi, dPsi, d2Psi)`` at ``X`` from a single root solve."""
    psi = _values(p, X)
    n = p.order
    d1 = -1.0 / (1.0 + n * psi ** (n - 1))
    d2 = n * (n - 1) * psi ** (n - 2) * d1**3
    return _as_output(psi, X), _as_output(d1, X), _as_output(d2, X)


def profile_derivs(p: Profile, X):
    """First and second derivative of ``Psi_i`` at ``X``.

    With ``D = 1 + (2i+1) Psi^{2i}`` the implicit relation gives
    ``Psi' = -1/D`` and ``Psi'' = 2i (2i+1) Psi^{2i-1} Psi'^3``.
    """
    _, d1, d2 = profile_all(p, X)
    return d1, d2


def residual_selfsimilar(p: Profile, X_grid) -> float:
    """Max over the grid of the profile-equation residual (0 for an empty grid)."""
    X = np.asarray(X_grid, dtype=float).reshape(-1)
    if X.size == 0:
        return 0.0
    psi, d1, _ = profile_all(p, X)
    res = -psi / (2 * p.i) + p.alpha * X * d1 + psi * d1
    return float(np.max(np.abs(res)))


# -- asymptotics ---------------------------------------------------------------

def series_coefficients(i: int, nterms: int) -> list:
    """Exact coefficients ``c_k`` with ``Psi_i(X) = sum_k c_k X^{2ik+1}`` near 0.

    Obtained by inverting the implicit relation as a power series: writing
    ``Psi = -X w(z)`` with ``z = X^{2i}`` turns it into ``w = 1 - z w^{2i+1}``,
    which is iterated to a fixed point in exact arithmetic.
    """
    n = 2 * i + 1
    w = [Fraction(1)] + [Fraction(0)] * (nterms - 1)
    for _ in range(nterms):
        power = [Fraction(1)] + [Fraction(0)] * (nterms - 1)
        for _ in range(n):
            power = _series_mul(power, w, nterms)
        w = [Fraction(1)] + [-power[k - 1] for k in range(1, nterms)]
    return [-c for c in w]


def _series_mul(a, b, nterms):
    out = [Fraction(0)] * nterms
    for k, ak in enumerate(a):
        if ak == 0:
            continue
        for m in range(nterms - k):
            out[k + m] += ak * b[m]
    return out


def fuss_catalan_coefficients(i: int, nterms: int) -> list:
    """Closed-form counterpart of :func:`series_coefficients` (Lagrange inversion)."""
    n = 2 * i + 1
    return [Fraction((-1) ** (k + 1) * comb(n * k, k), (n - 1) * k + 1) for k in range(nterms)]


def small_x_series(p: Profile, X, nterms: int = 2):
    """Truncated small-``X`` expansion; ``nterms=2`` gives ``-X + X^{2i+1}``."""
    coeffs = series_coefficients(p.i, nterms)
    X = np.asarray(X, dtype=float)
    z = X ** (2 * p.i)
    out = np.zeros_like(X)
    for k in reversed(range(nterms)):
        out = out * z + float(coeffs[k])
    return _as_output(X * out, X)


def large_x_asymptotic(p: Profile, X):
    """Two-term expansion of ``Psi_i`` as ``|X| -> infinity``."""
    X = np.asarray(X, dtype=float)
    n = p.order
    ax = np.abs(X)
    with np.errstate(divide="ignore"):
        val = -np.sign(X) * ax ** (1.0 / n) + np.sign(X) * ax ** (-1.0 + 2.0 / n) / n
    return _as_output(val, X)


def growth_envelope(p: Profile, X):
    """``|X| (1+|X|)^{1/(2i+1) - 1}``, the size of ``|Psi_i(X)|`` up to constants."""
    ax = np.abs(np.asarray(X, dtype=float))
    return _as_output(ax * (1.0 + ax) ** (1.0 / p.order - 1.0), X)


# -- eigenfunctions and linear operators ---------------------------------------

def phi_all(e: EigenfunctionSpec, X):
    """``(phi_j, dphi_j)`` with ``phi_j = Psi^j Psi'``."""
    psi, d1, d2 = profile_all(e.profile, np.asarray(X, dtype=float))
    j = e.j
    phi = psi**j * d1
    if j == 0:
        dphi = d2
    else:
        dphi = j * psi ** (j - 1) * d1**2 + psi**j * d2
    return _as_output(phi, X), _as_output(dphi, X)


def phi_eval(e: EigenfunctionSpec, X):
    return phi_all(e, X)[0]


def phi_envelope(e: EigenfunctionSpec, X):
    """Size of ``|phi_j|`` up to constants: ``|X|^j`` near 0, ``|X|^{(j+1)/(2i+1)-1}`` far out."""
    ax = np.abs(np.asarray(X, dtype=float))
    far = (e.j + 1) / (2 * e.i1 + 1) - 1.0
    return _as_output(ax**e.j * (1.0 + ax) ** (far - e.j), X)


def hx_apply(f, df, X, i1: int):
    """Apply the linearised operator around ``Psi_i1`` to samples ``f``, ``f'`` at ``X``."""
    p = Profile(i1)
    X = np.asarray(X, dtype=float)
    psi, d1, _ = profile_all(p, X)
    out = -np.asarray(f) / (2 * i1) + p.alpha * X * df + f * d1 + psi * df
    return _as_output(out, X)


def eigen_residual(e: EigenfunctionSpec, X_grid) -> float:
    """``max|H phi_j - lambda_j phi_j| / max|phi_j|`` over the grid."""
    X = np.asarray(X_grid, dtype=float)
    phi, dphi = phi_all(e, X)
    res = hx_apply(phi, dphi, X, e.i1) - e.lambda_j * phi
    scale = np.max(np.abs(phi))
    return float(np.max(np.abs(res)) / scale) if scale > 0 else 0.0


def _shifted_profiles(ctx: OperatorContext, X):
    """Per-bump terms of the transport field at ``X``.

    Yields ``(scale, psi, dpsi, d2psi)`` where ``scale = exp((alpha_l - alpha_1) s)``
    and the profile is evaluated at ``scale * (X - Y_l)``.
    """
    a1 = ctx.base.alpha
    for Y, p in zip(ctx.centers, ctx.profiles):
        scale = np.exp((p.alpha - a1) * ctx.s)
        psi, d1, d2 = profile_all(p, scale * (X - Y))
        yield scale, psi, d1, d2


def a_field_speed(ctx: OperatorContext, X):
    """Transport speed ``alpha_1 X + sum_l e^{(a1-al)s} Psi_l(e^{(al-a1)s}(X - Y_l))``."""
    X = np.asarray(X, dtype=float)
    out = ctx.base.alpha * X
    for scale, psi, _, _ in _shifted_profiles(ctx, X):
        out = out + psi / scale
    return _as_output(out, X)


def profile_sum_terms(ctx: OperatorContext, X):
    """Sums entering the self-similar evolution at ``X``.

    Returns a dict with

    ``speed``   the profile part of the transport speed (no ``alpha_1 X``),
    ``dspeed``  its X-derivative, ``sum_l Psi_l'``,
    ``cross``   ``sum_{l1 != l2} e^{(a1-a_l1)s} Psi_l1 Psi_l2'``,
    ``dpsi``    list of per-bump ``Psi_l'`` values.
    """
    X = np.asarray(X, dtype=float)
    terms = list(_shifted_profiles(ctx, X))
    vals = [psi / scale for scale, psi, _, _ in terms]
    ders = [d1 for _, _, d1, _ in terms]
    speed = sum(vals)
    dspeed = sum(ders)
    cross = speed * dspeed - sum(v * d for v, d in zip(vals, ders))
    return {"speed": speed, "dspeed": dspeed, "cross": cross, "dpsi": ders}


def log_grid(lo: float, hi: float, n: int, symmetric: bool = False) -> np.ndarray:
    """Log-spaced grid on ``[lo, hi]``; mirrored onto the negative axis if asked."""
    g = np.geomspace(lo, hi, n)
    if symmetric:
        g = np.concatenate([-g[::-1], g])
    return g


def profiles_from(indices: Sequence[int]) -> tuple:
    return tuple(Profile(i) for i in indices)
