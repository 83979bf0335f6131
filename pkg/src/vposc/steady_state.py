"""Spherically symmetric equilibria of the self-gravitating collisionless gas.

A stationary phase-space density of the form phi(cutoff - energy) * (L - L0)_+^l
reduces the field equation to a single radial ODE for y(r), the difference
between the cutoff energy and the potential.  Every positive central value
y(0) picks one member of a one-parameter family; the state is physical when
y reaches zero at a finite radius R.  This module builds such equilibria for
three ansatz families (isotropic/anisotropic power-law balls, power-law
shells with an angular-momentum cutoff, and the exponential bounded model),
tabulates all equilibrium fields on a uniform radial grid, and evaluates the
underlying phase-space density.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import beta


class AnsatzFamily(enum.Enum):
    POLYTROPIC_BALL = "polytropic_ball"
    POLYTROPIC_SHELL = "polytropic_shell"
    KING = "king"


class AnsatzError(ValueError):
    """Ansatz parameters outside the admissible window."""


class NonCompactSupportError(RuntimeError):
    """y(r) stayed positive out to the largest radius tried.

    Carries ``y_at_rmax`` and ``r_max`` so the caller can decide whether to
    retry with a larger radial range.
    """

    def __init__(self, y_at_rmax: float, r_max: float):
        self.y_at_rmax = y_at_rmax
        self.r_max = r_max
        super().__init__(
            f"no zero of y found up to r={r_max:g} (y there is {y_at_rmax:g}); "
            "raise r_max or check the ansatz"
        )


class NumericalBlowupError(RuntimeError):
    """The radial integrator produced a non-finite value."""


@dataclass(frozen=True)
class AnsatzModel:
    """Parameters of one steady-state ansatz.

    k and l are the power-law exponents of the energy and angular-momentum
    factors, L0 the angular-momentum cutoff (positive only for shells).  For
    the King family the form is fixed and k, l, L0 are unused.
    """

    family: AnsatzFamily
    k: float = 0.0
    l: float = 0.0
    L0: float = 0.0

    @property
    def is_polytropic(self) -> bool:
        return self.family is not AnsatzFamily.KING


def build_ansatz(family, k: float = 0.0, l: float = 0.0, L0: float = 0.0) -> AnsatzModel:
    """Validate parameters and return an AnsatzModel.

    ``family`` may be an AnsatzFamily or its string value.  Power-law models
    must satisfy l > -1/2 and -1 < k < 3l + 7/2; shells additionally need
    L0 > 0 while balls require L0 = 0.
    """
    if isinstance(family, str):
        family = AnsatzFamily(family)
    if family is AnsatzFamily.KING:
        return AnsatzModel(family=family)
    if not l > -0.5:
        raise AnsatzError(f"l={l:g} not admissible: need l > -1/2")
    if not (-1.0 < k < 3.0 * l + 3.5):
        raise AnsatzError(
            f"k={k:g} not admissible for l={l:g}: need -1 < k < 3l + 7/2 = {3.0 * l + 3.5:g}"
        )
    if L0 < 0:
        raise AnsatzError(f"L0={L0:g} not admissible: need L0 >= 0")
    if family is AnsatzFamily.POLYTROPIC_SHELL and L0 == 0:
        raise AnsatzError("shell ansatz needs L0 > 0 (L0 = 0 is a ball)")
    if family is AnsatzFamily.POLYTROPIC_BALL and L0 != 0:
        raise AnsatzError("ball ansatz needs L0 = 0 (use the shell family for L0 > 0)")
    return AnsatzModel(family=family, k=float(k), l=float(l), L0=float(L0))


def polytrope_norm(k: float, l: float) -> float:
    """Normalisation c_{k,l} of the reduced density kernel of a power-law model.

    Obtained by carrying out the velocity-space integral of the ansatz:
    first the angular-momentum direction (a Beta integral), then the radial
    velocity (another Beta integral).
    """
    return 2.0 ** (l + 1.5) * math.pi * beta(l + 1.0, k + 1.0) * beta(0.5, k + l + 2.0)


class _KingKernel:
    """Reduced density of the exponential bounded model, by quadrature.

    The one-dimensional speed integral is evaluated with a fixed
    Gauss-Legendre rule on a dense table in y and interpolated with a cubic
    spline.  The table is grown lazily when larger y values are requested.
    """

    _GL_NODES = 96
    _TABLE = 4097

    def __init__(self):
        self._ymax = 0.0
        self._spline = None
        nodes, weights = np.polynomial.legendre.leggauss(self._GL_NODES)
        # map from [-1, 1] to [0, 1]
        self._s = 0.5 * (nodes + 1.0)
        self._sw = 0.5 * weights

    def _raw(self, y):
        # g(y) = 4*pi*(2y)^{3/2} * int_0^1 (exp(y(1-s^2)) - 1) s^2 ds
        y = np.asarray(y, dtype=float)
        integ = (np.expm1(y[..., None] * (1.0 - self._s**2)) * self._s**2 * self._sw).sum(axis=-1)
        return 4.0 * math.pi * (2.0 * np.maximum(y, 0.0)) ** 1.5 * integ

    def _ensure(self, ymax: float):
        if self._spline is not None and ymax <= self._ymax:
            return
        self._ymax = max(1.05 * ymax, 1.0)
        ys = np.linspace(0.0, self._ymax, self._TABLE)
        self._spline = CubicSpline(ys, self._raw(ys))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ymax = float(y.max()) if y.size else 0.0
        if ymax <= 0.0:
            return np.zeros_like(y)
        self._ensure(ymax)
        out = np.where(y > 0.0, self._spline(np.clip(y, 0.0, None)), 0.0)
        return np.maximum(out, 0.0)


_king_kernel = _KingKernel()


def g_of_y(ansatz: AnsatzModel, y):
    """Reduced density kernel g evaluated at y (array friendly).

    g vanishes for y <= 0 and is positive for y > 0.  For power-law models
    g(y) = c_{k,l} y^{k+l+3/2}; for shells the same kernel applies to the
    effective argument y - L0/(2 r^2), which is handled by the caller.  The
    King kernel is computed by quadrature.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if ansatz.family is AnsatzFamily.KING:
        out = _king_kernel(y)
    else:
        expo = ansatz.k + ansatz.l + 1.5
        out = polytrope_norm(ansatz.k, ansatz.l) * np.where(y > 0.0, y, 0.0) ** expo
    return float(out[0]) if scalar else out


def _effective_y(ansatz: AnsatzModel, r, y):
    """Shift y by the angular-momentum barrier L0/(2 r^2); identity for L0 = 0."""
    if ansatz.L0 == 0.0:
        return y
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        barrier = np.where(r > 0.0, ansatz.L0 / (2.0 * r**2), np.inf)
    return y - barrier


def reduced_density(ansatz: AnsatzModel, r, y):
    """Spatial density belonging to potential level y at radius r.

    rho(r) = r^{2l} g(y - L0/(2 r^2)); the r factors are exact for all three
    families (l = 0, L0 = 0 for King).
    """
    r = np.asarray(r, dtype=float)
    geff = g_of_y(ansatz, _effective_y(ansatz, r, y))
    if ansatz.l == 0.0:
        return geff
    with np.errstate(invalid="ignore"):
        radial = np.where(r > 0.0, r ** (2.0 * ansatz.l), 0.0 if ansatz.l > 0 else np.inf)
    return radial * geff


@dataclass(frozen=True)
class GridSpec:
    """Radial discretisation for the equilibrium solve.

    ``cells`` fixed-size steps span the support; ``r_max`` is the initial
    guess for the outer radius and is doubled up to ``max_doublings`` times
    if y has not crossed zero.
    """

    cells: int = 4096
    r_max: float = 8.0
    max_doublings: int = 10


@dataclass
class SteadyStateProfile:
    """A solved equilibrium: radial tables plus scalar summary quantities.

    Tables live on a uniform grid [0, R] and are linearly interpolated.  The
    cutoff energy E0 equals -M_total/R because the exterior field is exactly
    Keplerian.  Ri is the inner support radius (zero except for shells).
    """

    ansatz: AnsatzModel
    y0: float
    radii: np.ndarray
    y: np.ndarray
    rho: np.ndarray
    mass: np.ndarray
    field: np.ndarray
    R: float
    Ri: float
    E0: float
    M_total: float

    def y_at(self, r):
        """y(r) everywhere: table interpolation inside, E0 + M/r outside."""
        r = np.asarray(r, dtype=float)
        inside = np.interp(r, self.radii, self.y)
        with np.errstate(divide="ignore"):
            outside = self.E0 + np.where(r > 0, self.M_total / r, np.inf)
        return np.where(r <= self.R, inside, outside)

    def potential(self, r):
        return self.E0 - self.y_at(r)

    def field_at(self, r):
        """Radial derivative of the potential; M/r^2 beyond the support."""
        r = np.asarray(r, dtype=float)
        inside = np.interp(r, self.radii, self.field)
        with np.errstate(divide="ignore"):
            outside = np.where(r > 0, self.M_total / r**2, 0.0)
        return np.where(r <= self.R, inside, outside)

    def density_at(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.R, np.interp(r, self.radii, self.rho), 0.0)


def _scalar_kernel(ansatz: AnsatzModel):
    """Fast scalar g for the integrator inner loop."""
    if ansatz.family is AnsatzFamily.KING:
        kernel = _king_kernel

        def g1(yv: float) -> float:
            if yv <= 0.0:
                return 0.0
            kernel._ensure(yv)
            return max(float(kernel._spline(yv)), 0.0)
    else:
        c = polytrope_norm(ansatz.k, ansatz.l)
        expo = ansatz.k + ansatz.l + 1.5

        def g1(yv: float) -> float:
            return c * yv**expo if yv > 0.0 else 0.0

    return g1


def _taylor_first_step(ansatz: AnsatzModel, g1, y0: float, h: float):
    """Expand (y, m) one step away from the coordinate singularity at r = 0.

    m grows like r^{2l+3}, so m/r^2 vanishes at the origin.  For shells the
    density is still switched off at r = h, hence the kernel limit is used.
    """
    g0 = 0.0 if ansatz.L0 > 0.0 else g1(y0)
    two_l = 2.0 * ansatz.l
    m = 4.0 * math.pi * g0 * h ** (two_l + 3.0) / (two_l + 3.0)
    y = y0 - 4.0 * math.pi * g0 * h ** (two_l + 2.0) / ((two_l + 3.0) * (two_l + 2.0))
    return y, m


def _rk4_step(ansatz: AnsatzModel, g1, r: float, y: float, m: float, h: float):
    """One classical fourth-order step of y' = -m/r^2, m' = 4 pi r^{2l+2} G(r, y)."""
    two_l2 = 2.0 * ansatz.l + 2.0
    L0 = ansatz.L0

    def rhs(rr, yy, mm):
        dy = -mm / (rr * rr)
        yeff = yy if L0 == 0.0 else yy - L0 / (2.0 * rr * rr)
        dm = 4.0 * math.pi * rr**two_l2 * g1(yeff)
        return dy, dm

    k1y, k1m = rhs(r, y, m)
    k2y, k2m = rhs(r + 0.5 * h, y + 0.5 * h * k1y, m + 0.5 * h * k1m)
    k3y, k3m = rhs(r + 0.5 * h, y + 0.5 * h * k2y, m + 0.5 * h * k2m)
    k4y, k4m = rhs(r + h, y + h * k3y, m + h * k3m)
    yn = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    mn = m + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    if not (math.isfinite(yn) and math.isfinite(mn)):
        raise NumericalBlowupError(f"integrator blew up near r={r:g}")
    return yn, mn


def _integrate_pass(ansatz: AnsatzModel, g1, y0: float, h: float, n_steps: int):
    """Fixed-step integration from the origin; returns the node tables.

    Stops early (returning shorter tables) once y has gone negative.
    """
    rs = np.empty(n_steps + 1)
    ys = np.empty(n_steps + 1)
    ms = np.empty(n_steps + 1)
    rs[0], ys[0], ms[0] = 0.0, y0, 0.0
    y, m = _taylor_first_step(ansatz, g1, y0, h)
    rs[1], ys[1], ms[1] = h, y, m
    if y < 0.0:
        return rs[:2], ys[:2], ms[:2]
    r = h
    for i in range(2, n_steps + 1):
        y, m = _rk4_step(ansatz, g1, r, y, m, h)
        r = i * h
        rs[i], ys[i], ms[i] = r, y, m
        if y < 0.0:
            return rs[: i + 1], ys[: i + 1], ms[: i + 1]
    return rs, ys, ms


def _bisect_zero(ansatz: AnsatzModel, g1, r0: float, y0_node: float, m0_node: float, h: float,
                 rel_tol: float = 1e-10):
    """Locate the zero of y inside the cell [r0, r0 + h] by bisection.

    The trial function advances one integrator step of variable length from
    the last positive node; y is monotone there so plain bisection applies.
    """
    lo, hi = 0.0, h

    def y_end(s):
        if s == 0.0:
            return y0_node
        yn, _ = _rk4_step(ansatz, g1, r0, y0_node, m0_node, s)
        return yn

    while (hi - lo) > rel_tol * max(r0 + hi, h):
        mid = 0.5 * (lo + hi)
        if y_end(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    yn, mn = _rk4_step(ansatz, g1, r0, y0_node, m0_node, s)
    return r0 + s, yn, mn


def solve_steady_state(ansatz: AnsatzModel, y0: float,
                       grid: GridSpec | None = None) -> SteadyStateProfile:
    """Construct the equilibrium with central value y(0) = y0 > 0.

    The outer radius R (zero of y) is bracketed on a coarse pass with
    automatic doubling of the radial range, refined by bisection, and the
    final tables are rebuilt on a uniform grid [0, R] so the last node sits
    exactly on the support boundary.

    Raises NonCompactSupportError when y stays positive over the whole
    (repeatedly doubled) range and NumericalBlowupError on integrator
    failure.
    """
    if not y0 > 0.0:
        raise ValueError(f"y0 must be positive, got {y0:g}")
    grid = grid or GridSpec()
    g1 = _scalar_kernel(ansatz)

    r_max = grid.r_max
    for _ in range(grid.max_doublings + 1):
        h = r_max / grid.cells
        rs, ys, ms = _integrate_pass(ansatz, g1, y0, h, grid.cells)
        if ys[-1] < 0.0:
            break
        r_max *= 2.0
    else:
        raise NonCompactSupportError(float(ys[-1]), float(rs[-1]))

    shrink = 0
    while len(rs) == 2:
        # support smaller than one coarse cell; fall back to a finer bracket
        h /= 16.0
        rs, ys, ms = _integrate_pass(ansatz, g1, y0, h, grid.cells)
        shrink += 1
        if shrink > 30:
            raise NumericalBlowupError("support bracketing failed to converge")
    R, _, _ = _bisect_zero(ansatz, g1, rs[-2], ys[-2], ms[-2], h)

    # Rebuild on the uniform grid [0, R]; polish R with Newton corrections so
    # the last node lands on the zero of y to integrator accuracy even when
    # the coarse pass was much cruder than the final one.
    for _ in range(4):
        h = R / grid.cells
        rs, ys, ms = _integrate_pass(ansatz, g1, y0, h, grid.cells)
        if len(rs) != grid.cells + 1:
            # crossed zero early: shrink R to the bisected crossing
            R, _, _ = _bisect_zero(ansatz, g1, rs[-2], ys[-2], ms[-2], h)
            continue
        y_res, m_end = float(ys[-1]), float(ms[-1])
        dR = y_res * R * R / m_end
        if abs(dR) <= 1e-13 * R:
            break
        R += dR

    M_total = float(ms[-1])
    radii = np.linspace(0.0, R, grid.cells + 1)
    y_tab = np.asarray(ys)
    y_tab[-1] = 0.0
    mass = np.asarray(ms)
    mass[-1] = M_total
    rho = reduced_density(ansatz, radii, y_tab)
    rho[-1] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        field = np.where(radii > 0.0, mass / radii**2, 0.0)
    E0 = -M_total / R
    Ri = math.sqrt(ansatz.L0 / (2.0 * y0)) if ansatz.L0 > 0.0 else 0.0
    return SteadyStateProfile(
        ansatz=ansatz, y0=float(y0), radii=radii, y=y_tab, rho=rho, mass=mass,
        field=field, R=float(R), Ri=Ri, E0=float(E0), M_total=M_total,
    )


def central_density(profile: SteadyStateProfile) -> float:
    """Density at the centre, or the interior maximum for hollow states."""
    if profile.rho[0] > 0.0:
        return float(profile.rho[0])
    return float(profile.rho.max())


def evaluate_f0(profile: SteadyStateProfile, r, w, L):
    """Steady phase-space density at (r, w, L); zero outside the support."""
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    L = np.asarray(L, dtype=float)
    r, w, L = np.broadcast_arrays(r, w, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        barrier = np.where(r > 0.0, L / (2.0 * r**2), np.where(L > 0.0, np.inf, 0.0))
    eta = profile.y_at(r) - 0.5 * w**2 - barrier
    ans = profile.ansatz
    if ans.family is AnsatzFamily.KING:
        out = np.where(eta > 0.0, np.expm1(np.clip(eta, None, 500.0)), 0.0)
        return np.maximum(out, 0.0)
    lead = np.where(eta > 0.0, eta, 0.0)
    with np.errstate(invalid="ignore"):
        phi = np.where(eta > 0.0, lead**ans.k, 0.0)
    if ans.l == 0.0:
        ang = np.where(L >= ans.L0, 1.0, 0.0)
    else:
        excess = np.where(L > ans.L0, L - ans.L0, 0.0)
        with np.errstate(invalid="ignore"):
            ang = np.where(L > ans.L0, excess**ans.l, 0.0)
    return phi * ang


# ---------------------------------------------------------------------------
# profile files

_PROFILE_MAGIC = "vposc-profile v1"


def save_profile(profile: SteadyStateProfile, path):
    """Write the profile as a columnar text file with a commented header."""
    a = profile.ansatz
    header = (
        f"{_PROFILE_MAGIC}\n"
        f"family={a.family.value} k={a.k!r} l={a.l!r} L0={a.L0!r}\n"
        f"y0={profile.y0!r} R={profile.R!r} Ri={profile.Ri!r} "
        f"E0={profile.E0!r} M_total={profile.M_total!r}\n"
        "columns: r y rho mass dUdr"
    )
    data = np.column_stack([profile.radii, profile.y, profile.rho, profile.mass, profile.field])
    np.savetxt(path, data, fmt="%.17e", header=header)


def load_profile(path) -> SteadyStateProfile:
    meta = {}
    with open(path) as fh:
        first = fh.readline()
        if _PROFILE_MAGIC not in first:
            raise ValueError(f"{path}: not a {_PROFILE_MAGIC} file")
        for _ in range(2):
            for item in fh.readline().lstrip("# ").split():
                key, _, val = item.partition("=")
                meta[key] = val
    data = np.loadtxt(path)
    ansatz = AnsatzModel(
        family=AnsatzFamily(meta["family"]),
        k=float(meta["k"]), l=float(meta["l"]), L0=float(meta["L0"]),
    )
    return SteadyStateProfile(
        ansatz=ansatz, y0=float(meta["y0"]),
        radii=data[:, 0], y=data[:, 1], rho=data[:, 2], mass=data[:, 3], field=data[:, 4],
        R=float(meta["R"]), Ri=float(meta["Ri"]), E0=float(meta["E0"]),
        M_total=float(meta["M_total"]),
    )
