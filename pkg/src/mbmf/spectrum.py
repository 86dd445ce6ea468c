"""Rényi exponents, the multi-branched Legendre-Fenchel spectrum and its phases.

Every derived quantity (tau, D, alpha, f, c, relatives) is a linear function
of the sampled generalized Hurst exponent ``h(q)``.  The module builds those
linear maps explicitly as sparse matrices, which gives first-order error
propagation for free: with independent errors ``sigma`` on ``h`` the
variance of ``M @ h`` is ``(M * M) @ sigma**2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect
from scipy.signal import savgol_filter

from .errors import ParameterError, ResolutionError
from .scaling import EscortDistribution, ScalingResult, loglog_fit, log_moments, partition_function

MIN_GRID_POINTS = 21
SAVGOL_WINDOW = 7
SAVGOL_ORDER = 3


def derivative_matrix(n: int, step: float, method: str = "central") -> sp.csr_matrix:
    """Sparse first-derivative operator on a uniform grid.

    ``central``: second-order central differences, second-order one-sided
    stencils at both ends (same as ``np.gradient(..., edge_order=2)``).
    ``savgol``: local cubic fit over 7 points.
    """
    if method == "central":
        if n < 3:
            raise ResolutionError("need at least 3 grid points for derivatives")
        rows, cols, vals = [], [], []
        for i in range(1, n - 1):
            rows += [i, i]
            cols += [i - 1, i + 1]
            vals += [-0.5, 0.5]
        rows += [0, 0, 0, n - 1, n - 1, n - 1]
        cols += [0, 1, 2, n - 3, n - 2, n - 1]
        vals += [-1.5, 2.0, -0.5, 0.5, -2.0, 1.5]
        return sp.csr_matrix((np.array(vals) / step, (rows, cols)), shape=(n, n))
    if method == "savgol":
        dense = savgol_filter(np.eye(n), SAVGOL_WINDOW, SAVGOL_ORDER, deriv=1, delta=step,
                              axis=0, mode="interp")
        return sp.csr_matrix(dense)
    raise ParameterError(f"unknown derivative method {method!r}")


def _uniform_step(q) -> float:
    q = np.asarray(q, dtype=float)
    d = np.diff(q)
    if d.size == 0 or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12) or d[0] <= 0:
        raise ParameterError("q grid must be uniform and increasing")
    return float(d[0])


def _index_of(q, value, step):
    hits = np.flatnonzero(np.abs(q - value) < 0.25 * step)
    return int(hits[0]) if hits.size else None


def _propagate(M, var):
    return np.sqrt(np.asarray(M.multiply(M) @ var).ravel())


@dataclass
class ExponentSet:
    q: np.ndarray
    h: np.ndarray
    tau: np.ndarray
    D: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    c: np.ndarray
    dalpha_dq: np.ndarray
    h_rel: np.ndarray
    tau_rel: np.ndarray
    D_rel: np.ndarray
    alpha_from_tau: np.ndarray
    errors: dict
    derivative: str = "central"
    anchored: bool = True
    error_mode: str = "propagate"
    maps: dict = field(default_factory=dict, repr=False)
    h_boot: np.ndarray | None = field(default=None, repr=False)

    @property
    def step(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def index_q1(self) -> int:
        return _index_of(self.q, 1.0, self.step)

    @property
    def index_q0(self) -> int | None:
        return _index_of(self.q, 0.0, self.step)

    def apply(self, name: str, h_samples: np.ndarray) -> np.ndarray:
        """Evaluate quantity ``name`` for each row of ``h_samples`` (e.g. bootstrap draws)."""
        M, offset = self.maps[name]
        return np.asarray(M @ np.atleast_2d(h_samples).T).T + offset

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


def exponents(scaling: ScalingResult | None = None, *, q=None, h=None, h_err=None,
              derivative: str = "central", anchor_contact: bool = True,
              errors: str = "auto") -> ExponentSet:
    """Derive tau, D, alpha, f, c and relative quantities from ``h(q)``.

    ``tau = q h - h(1)`` (``anchor_contact=False`` drops the ``h(1)`` shift and
    with it the contact point).  ``alpha = h + q dh/dq`` is the primary
    Hölder exponent; ``alpha_from_tau`` is the finite-difference ``dtau/dq``
    kept as a cross-check.  ``D(1)`` takes the limit value ``alpha(1)``.

    Error bands: ``"propagate"`` pushes independent ``h_err`` through the
    linear maps; ``"bootstrap"`` maps every bootstrap draw of ``h`` and takes
    the spread, which keeps the correlation between neighbouring q.
    ``"auto"`` uses the bootstrap when draws are available.
    """
    h_boot = scaling.h_boot if scaling is not None else None
    if errors not in ("auto", "propagate", "bootstrap"):
        raise ParameterError(f"unknown error mode {errors!r}")
    if errors == "bootstrap" and h_boot is None:
        raise ParameterError("bootstrap errors need bootstrap draws of h")
    if scaling is not None:
        q, h = scaling.q, scaling.h
        h_err = scaling.h_err if h_err is None else h_err
    q = np.asarray(q, dtype=float)
    h = np.asarray(h, dtype=float)
    n = q.size
    if n < MIN_GRID_POINTS:
        raise ResolutionError(f"q grid has {n} points; at least {MIN_GRID_POINTS} are needed "
                              "for stable second differences")
    step = _uniform_step(q)
    i1 = _index_of(q, 1.0, step)
    if i1 is None:
        raise ParameterError("q grid must contain q = 1")
    q[i1] = 1.0
    i0 = _index_of(q, 0.0, step)
    if i0 is not None:
        q[i0] = 0.0
    sigma = np.zeros(n) if h_err is None else np.asarray(h_err, dtype=float)

    I = sp.identity(n, format="csr")
    Qd = sp.diags(q)
    D1 = derivative_matrix(n, step, derivative)
    pick1 = sp.csr_matrix((np.ones(n), (np.arange(n), np.full(n, i1))), shape=(n, n))

    M_tau = (Qd - pick1) if anchor_contact else Qd.tocsr()
    M_alpha = (I + Qd @ D1).tocsr()
    M_f = (Qd @ M_alpha - M_tau).tocsr()
    M_dalpha = (D1 @ M_alpha).tocsr()
    M_c = (-(sp.diags(q**2)) @ M_dalpha).tocsr()
    with np.errstate(divide="ignore"):
        inv = np.where(np.arange(n) == i1, 0.0, 1.0 / (q - 1.0))
    M_D = sp.lil_matrix(sp.diags(inv) @ M_tau)
    M_D[i1, :] = M_alpha[i1, :] if anchor_contact else np.nan
    M_D = M_D.tocsr()
    M_hrel = (I - pick1).tocsr()
    M_taurel = (Qd @ M_hrel).tocsr()
    M_Drel = sp.lil_matrix(sp.diags(inv) @ M_taurel)
    M_Drel[i1, :] = D1[i1, :]
    M_Drel = M_Drel.tocsr()
    M_alpha_tau = (D1 @ M_tau).tocsr()

    maps = {"tau": M_tau, "alpha": M_alpha, "f": M_f, "dalpha_dq": M_dalpha, "c": M_c, "D": M_D,
            "h_rel": M_hrel, "tau_rel": M_taurel, "D_rel": M_Drel, "alpha_from_tau": M_alpha_tau,
            "h": I}
    values = {name: np.asarray(M @ h).ravel() for name, M in maps.items()}
    # exact zeros where the construction guarantees them
    if anchor_contact:
        values["tau"][i1] = 0.0
    values["tau_rel"][i1] = 0.0
    values["h_rel"][i1] = 0.0
    if i0 is not None:
        values["c"][i0] = 0.0
        values["D_rel"][i0] = 0.0
        values["tau_rel"][i0] = 0.0
    if h_boot is not None and errors != "propagate":
        bands = {name: np.std(np.asarray(M @ h_boot.T), axis=1, ddof=1) for name, M in maps.items()}
        error_mode = "bootstrap"
    else:
        var = sigma**2
        bands = {name: _propagate(M, var) for name, M in maps.items() if name != "h"}
        bands["h"] = sigma
        error_mode = "propagate"
    return ExponentSet(
        q=q, h=h.copy(), tau=values["tau"], D=values["D"], alpha=values["alpha"], f=values["f"],
        c=values["c"], dalpha_dq=values["dalpha_dq"], h_rel=values["h_rel"],
        tau_rel=values["tau_rel"], D_rel=values["D_rel"], alpha_from_tau=values["alpha_from_tau"],
        errors=bands, derivative=derivative, anchored=anchor_contact, error_mode=error_mode,
        maps={k: (v, 0.0) for k, v in maps.items()}, h_boot=h_boot,
    )


# ----------------------------------------------------------------------------
# branches


@dataclass
class TurningPoint:
    index: int
    q_extr: float
    alpha_s: float
    alpha_ddot: float
    kind: str
    divergence_exponent: float = float("nan")
    divergence_exponent_err: float = float("nan")
    n_fit_points: int = 0
    c_ratio: float = float("nan")


@dataclass
class Branch:
    start: int
    stop: int  # inclusive
    q_interval: tuple
    alpha: np.ndarray
    f: np.ndarray
    q: np.ndarray
    stability: str
    is_main: bool = False
    d2f_continuous: bool = True

    @property
    def alpha_range(self) -> tuple:
        return float(self.alpha.min()), float(self.alpha.max())


@dataclass
class BranchSet:
    branches: list
    turning_points: list
    join_mismatch: list
    smooth: bool

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    def __getitem__(self, k):
        return self.branches[k]

    @property
    def main(self) -> Branch | None:
        for b in self.branches:
            if b.is_main:
                return b
        return None


def _signs(diff, atol):
    s = np.where(np.abs(diff) <= atol, 0, np.sign(diff)).astype(int)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        return s
    # carry the last non-zero sign across flat stretches
    s[: nz[0]] = s[nz[0]]
    for k in range(nz[0] + 1, s.size):
        if s[k] == 0:
            s[k] = s[k - 1]
    return s


def find_turning_points(q, alpha, alpha_err=None, n_sigma: float = 3.0, atol: float | None = None):
    """Indices of the significant local extrema of ``alpha(q)``.

    Candidates are sign changes of the discrete derivative; neighbouring
    extrema whose alpha values differ by less than ``n_sigma`` times the
    propagated error are removed in pairs (wiggles), and an extremum that
    rises less than that above a grid end is dropped.
    """
    alpha = np.asarray(alpha, dtype=float)
    err = np.zeros_like(alpha) if alpha_err is None else np.asarray(alpha_err, dtype=float)
    if atol is None:
        atol = 1e-12 * max(1.0, float(np.max(np.abs(alpha))))
    s = _signs(np.diff(alpha), atol)
    ext = [k for k in range(1, alpha.size - 1) if s[k - 1] != s[k] and s[k - 1] != 0]
    nodes = [0] + ext + [alpha.size - 1]

    def small(i, j):
        return abs(alpha[i] - alpha[j]) <= max(n_sigma * max(err[i], err[j]), atol)

    changed = True
    while changed and len(nodes) > 2:
        changed = False
        for k in range(1, len(nodes) - 2):
            if small(nodes[k], nodes[k + 1]):
                del nodes[k:k + 2]
                changed = True
                break
        if changed:
            continue
        if len(nodes) > 2 and small(nodes[0], nodes[1]):
            del nodes[1]
            changed = True
        elif len(nodes) > 2 and small(nodes[-2], nodes[-1]):
            del nodes[-2]
            changed = True
    return nodes[1:-1]


def _refine(q, alpha, k):
    step = q[1] - q[0]
    am, a0, ap = alpha[k - 1], alpha[k], alpha[k + 1]
    curv = am - 2.0 * a0 + ap
    if curv == 0:
        return q[k], a0, 0.0
    q_ext = q[k] - step * (ap - am) / (2.0 * curv)
    a_s = a0 - (ap - am) ** 2 / (8.0 * curv)
    return float(q_ext), float(a_s), float(curv / step**2)


def segment_branches(ex: ExponentSet, n_sigma: float = 3.0) -> BranchSet:
    """Split the spectrum into branches at the turning points of ``alpha(q)``."""
    q, alpha, f = ex.q, ex.alpha, ex.f
    ext = find_turning_points(q, alpha, ex.errors.get("alpha"), n_sigma=n_sigma)
    tps = []
    for k in ext:
        q_ext, a_s, a_dd = _refine(q, alpha, k)
        kind = "maximum" if alpha[k] >= max(alpha[k - 1], alpha[k + 1]) else "minimum"
        tps.append(TurningPoint(index=k, q_extr=q_ext, alpha_s=a_s, alpha_ddot=a_dd, kind=kind))
    bounds = [0] + ext + [q.size - 1]
    branches = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        sl = slice(a, b + 1)
        order = np.argsort(alpha[sl], kind="stable")
        stable = alpha[b] <= alpha[a]
        interior = ex.dalpha_dq[a + 1:b] if b - a > 1 else ex.dalpha_dq[sl]
        continuous = bool(np.all(interior <= 0) or np.all(interior >= 0))
        branches.append(Branch(start=a, stop=b, q_interval=(float(q[a]), float(q[b])),
                               alpha=alpha[sl][order], f=f[sl][order], q=q[sl][order],
                               stability="stable" if stable else "unstable",
                               d2f_continuous=continuous))
    main = [br for br in branches if br.q_interval[0] <= 1.0 < br.q_interval[1]]
    main = main or [br for br in branches if br.q_interval[0] < 1.0 <= br.q_interval[1]]
    if main:
        main[0].is_main = True
    mismatch = []
    step = ex.step
    for tp in tps:
        k = tp.index
        left = (f[k] - f[k - 1]) / (alpha[k] - alpha[k - 1])
        right = (f[k + 1] - f[k]) / (alpha[k + 1] - alpha[k])
        mismatch.append(float(abs(left - right)))
    smooth = all(m <= 2.5 * step for m in mismatch)
    return BranchSet(branches=branches, turning_points=tps, join_mismatch=mismatch, smooth=smooth)


# ----------------------------------------------------------------------------
# phases


@dataclass
class Crossing:
    alpha: float
    f: float
    branches: tuple
    q_pair: tuple
    converged: bool = True
    residual: float = 0.0


@dataclass
class PhaseDiagram:
    turning_points: list
    second_order_points: list
    first_order_crossings: list
    stability_map: list
    metastable_segments: list


def branch_interpolant(branch: Branch):
    """Piecewise-cubic ``f(alpha)`` on one branch, Hermite with slopes ``df/dalpha = q``."""
    a, f, qq = branch.alpha, branch.f, branch.q
    keep = np.concatenate([[True], np.diff(a) > 0])
    return CubicHermiteSpline(a[keep], f[keep], qq[keep], extrapolate=False)


def _divergence_fit(ex: ExponentSet, tp: TurningPoint, lo: int, hi: int,
                    skip: int = 2, reach: int = 15):
    q, alpha = ex.q, ex.alpha
    with np.errstate(divide="ignore"):
        d2f = 1.0 / ex.dalpha_dq
    idx = [tp.index + o for o in range(skip + 1, reach + 1)] + \
          [tp.index - o for o in range(skip + 1, reach + 1)]
    idx = [k for k in idx if lo <= k <= hi]
    x = np.log(np.abs(alpha[idx] - tp.alpha_s)) if idx else np.array([])
    y = np.log(np.abs(d2f[idx])) if idx else np.array([])
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 5:
        return float("nan"), float("nan"), int(x.size)
    slope, _, se, _ = loglog_fit(x, y[None, :])
    return float(slope[0]), float(se[0]), int(x.size)


def _c_ratio(ex: ExponentSet, tp: TurningPoint, lo: int, hi: int, reach: int = 5):
    idx = [k for k in range(tp.index - reach, tp.index + reach + 1) if lo <= k <= hi]
    qq = ex.q[idx]
    model = -(qq**2) * (qq - tp.q_extr) * tp.alpha_ddot
    denom = float(np.sum(model**2))
    return float(np.sum(ex.c[idx] * model) / denom) if denom > 0 else float("nan")


def _runs(labels, q):
    out = []
    start = 0
    for k in range(1, len(labels) + 1):
        if k == len(labels) or labels[k] != labels[start]:
            out.append({"q_lo": float(q[start]), "q_hi": float(q[k - 1]), "phase": labels[start]})
            start = k
    return out


def classify_phases(ex: ExponentSet, branches: BranchSet | None = None) -> PhaseDiagram:
    """Stability map, second-order (turning) points and first-order crossings."""
    if branches is None:
        branches = segment_branches(ex)
    tps = branches.turning_points
    bounds = [0] + [tp.index for tp in tps] + [ex.q.size - 1]
    for k, tp in enumerate(tps):
        lo, hi = bounds[k], bounds[k + 2]
        tp.divergence_exponent, tp.divergence_exponent_err, tp.n_fit_points = \
            _divergence_fit(ex, tp, lo, hi)
        tp.c_ratio = _c_ratio(ex, tp, lo, hi)

    crossings = []
    metastable = []
    stable = [k for k, b in enumerate(branches) if b.stability == "stable"]
    for i, j in itertools.combinations(stable, 2):
        bi, bj = branches[i], branches[j]
        lo = max(bi.alpha_range[0], bj.alpha_range[0])
        hi = min(bi.alpha_range[1], bj.alpha_range[1])
        if not lo < hi:
            continue
        fi, fj = branch_interpolant(bi), branch_interpolant(bj)

        def g(a):
            return float(fi(a) - fj(a))

        knots = np.unique(np.concatenate([bi.alpha, bj.alpha, np.linspace(lo, hi, 257)]))
        knots = knots[(knots >= lo) & (knots <= hi)]
        vals = np.array([g(a) for a in knots])
        for a0, a1, v0, v1 in zip(knots[:-1], knots[1:], vals[:-1], vals[1:]):
            if not (np.isfinite(v0) and np.isfinite(v1)) or v0 * v1 > 0 or v0 == v1 == 0:
                continue
            if v1 == 0 and a1 != knots[-1]:
                continue  # counted as the left end of the next interval
            root, info = bisect(g, a0, a1, xtol=1e-14, rtol=8.9e-16, maxiter=200,
                                full_output=True, disp=False)
            q_i = float(fi.derivative()(root))
            q_j = float(fj.derivative()(root))
            crossings.append(Crossing(alpha=float(root), f=float(fi(root)), branches=(i, j),
                                      q_pair=(q_i, q_j), converged=bool(info.converged),
                                      residual=abs(g(root))))
            # the overhang of each branch towards the unstable region joining them is metastable
            for k_b, q_x, toward_right in ((i, q_i, True), (j, q_j, False)):
                br = branches[k_b]
                q_end = br.q_interval[1] if toward_right else br.q_interval[0]
                seg = (min(q_x, q_end), max(q_x, q_end))
                metastable.append({"branch": k_b, "q_lo": seg[0], "q_hi": seg[1],
                                   "alpha_x": float(root), "q_crossing": q_x})

    # slopes at round-off level (flat alpha) count as stable
    roundoff = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(ex.alpha)))) / ex.step
    labels = np.where(ex.dalpha_dq <= roundoff, "stable", "unstable").astype(object)
    for seg in metastable:
        br = branches[seg["branch"]]
        sel = (ex.q >= seg["q_lo"]) & (ex.q <= seg["q_hi"])
        sel[: br.start] = False
        sel[br.stop + 1:] = False
        labels[sel & (labels == "stable")] = "metastable"
    return PhaseDiagram(turning_points=tps, second_order_points=list(tps),
                        first_order_crossings=crossings, stability_map=_runs(list(labels), ex.q),
                        metastable_segments=metastable)


# ----------------------------------------------------------------------------
# diagnostics


@dataclass
class ContactDiagnostics:
    f_minus_alpha: float
    slope_minus_one: float
    f_minus_alpha_err: float
    slope_err: float
    ok: bool


def contact_check(ex: ExponentSet, atol: float = 1e-4, n_sigma: float = 3.0) -> ContactDiagnostics:
    """Contact conditions at ``q = 1``: ``f(alpha(1)) = alpha(1)`` with unit slope.

    For a monofractal the spectrum is a single point; the slope is then
    reported as NaN and only the value condition is checked.
    """
    i1 = ex.index_q1
    n = ex.q.size
    D1 = derivative_matrix(n, ex.step, "central")
    M_f, _ = ex.maps["f"]
    M_a, _ = ex.maps["alpha"]
    df = (D1 @ M_f)[i1]
    da = (D1 @ M_a)[i1]
    dfv = float(np.asarray(df @ ex.h).ravel()[0])
    dav = float(np.asarray(da @ ex.h).ravel()[0])
    slope = dfv / dav if dav != 0 else float("nan")
    res_map = (M_f - M_a)[i1]
    if ex.error_mode == "bootstrap" and ex.h_boot is not None:
        hb = ex.h_boot.T
        slopes = np.asarray(df @ hb).ravel() / np.asarray(da @ hb).ravel()
        slope_err = float(np.std(slopes, ddof=1))
        res_err = float(np.std(np.asarray(res_map @ hb).ravel(), ddof=1))
    else:
        var = ex.errors["h"] ** 2
        lin = (df - slope * da) / dav if dav != 0 else df * np.nan
        slope_err = float(np.sqrt(np.asarray(lin.multiply(lin) @ var).ravel()[0]))
        res_err = float(np.sqrt(np.asarray(res_map.multiply(res_map) @ var).ravel()[0]))
    r1 = float(ex.f[i1] - ex.alpha[i1])
    r2 = slope - 1.0
    # a point spectrum (flat alpha) has no slope; the value condition alone decides
    flat = abs(dav) <= 64 * np.finfo(float).eps * max(1.0, abs(float(ex.alpha[i1]))) / ex.step
    ok = abs(r1) <= max(n_sigma * res_err, atol) and (
        flat or abs(r2) <= max(n_sigma * slope_err, atol))
    return ContactDiagnostics(f_minus_alpha=r1, slope_minus_one=r2, f_minus_alpha_err=res_err,
                              slope_err=slope_err, ok=bool(ok))


def identity_residuals(ex: ExponentSet) -> dict:
    """Largest residuals of the exact and finite-difference identities on the grid."""
    q = ex.q
    Dp = np.gradient(ex.D, q, edge_order=2)
    i1, i0 = ex.index_q1, ex.index_q0
    out = {
        "legendre_roundtrip": float(np.max(np.abs(q * ex.alpha - ex.f - ex.tau))),
        "f_vs_D": float(np.max(np.abs(ex.f - (ex.D + q * (q - 1) * Dp)))),
        "alpha_vs_D": float(np.max(np.abs(ex.alpha - (ex.D + (q - 1) * Dp)))),
        "alpha_routes": float(np.max(np.abs(ex.alpha - ex.alpha_from_tau))),
        "tau_at_1": float(abs(ex.tau[i1])),
        "D_rel_vs_D": float(np.max(np.abs(ex.D_rel - (ex.D - ex.h[i1])))),
    }
    if i0 is not None:
        out["tau0_plus_D0"] = float(abs(ex.tau[i0] + ex.h[i1]))
        out["alpha_minus_h_at_0"] = float(abs(ex.alpha[i0] - ex.h[i0]))
    return out


@dataclass
class InformationDiagnostics:
    scale_s: int
    info_over_ln_s: float
    dh_dq_at_1: float
    residual: float
    info_slope: float = float("nan")
    slope_residual: float = float("nan")
    D_rel2_from_h: float = float("nan")
    lnZ2_over_ln_s: float = float("nan")
    lnZ2_slope: float = float("nan")
    band: float = float("nan")


def information_diagnostics(escort: EscortDistribution, scaling: ScalingResult,
                            table=None) -> InformationDiagnostics:
    """Shannon-information and correlation-dimension checks at one scale.

    ``info_over_ln_s = sum p ln p / ln s`` compares with ``dh/dq`` at ``q = 1``.
    The literal ratio carries a finite-size offset of order ``ln N_d / ln s``;
    with ``table`` the log-log slope of ``sum p ln p`` (and of ``ln Z_2``) over
    the fit range is also reported, for which the relation is exact up to the
    q-derivative discretisation.
    """
    s = escort.scale_s
    if s is None or s <= 1:
        raise ParameterError("information diagnostics need a scale s > 1")
    p = escort.p
    with np.errstate(divide="ignore", invalid="ignore"):
        info = float(np.sum(np.where(p > 0, p * np.log(p), 0.0)))
    q = scaling.q
    step = _uniform_step(q)
    i1 = _index_of(q, 1.0, step)
    i2 = _index_of(q, 2.0, step)
    D1 = derivative_matrix(q.size, step)
    dh1 = float((D1 @ scaling.h)[i1])
    out = InformationDiagnostics(scale_s=int(s), info_over_ln_s=info / np.log(s), dh_dq_at_1=dh1,
                                 residual=info / np.log(s) - dh1)
    if i2 is not None:
        out.D_rel2_from_h = float(2.0 * (scaling.h[i2] - scaling.h[i1]))
        out.lnZ2_over_ln_s = float(np.log(partition_function(escort, 2.0)) / np.log(s))
    if scaling.h_boot is not None:
        out.band = float(np.std(np.asarray(D1 @ scaling.h_boot.T)[i1], ddof=1))
    if table is not None:
        lo, hi = scaling.fit_range
        mask = (table.scales >= lo) & (table.scales <= hi)
        F = np.sqrt(table.F2[mask])
        P = F / F.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            infos = np.sum(np.where(P > 0, P * np.log(P), 0.0), axis=1)
        lnZ2 = np.log(np.sum(P**2, axis=1))
        x = np.log(table.scales[mask].astype(float))
        out.info_slope = float(loglog_fit(x, infos[None, :])[0][0])
        out.slope_residual = out.info_slope - dh1
        out.lnZ2_slope = float(loglog_fit(x, lnZ2[None, :])[0][0])
    return out


@dataclass
class Violation:
    rule: str
    q: float
    q_other: float | None
    detail: str


def bounds_check(ex: ExponentSet) -> list[Violation]:
    """Check the generalized dimension bounds; returns every violated (pair of) grid point(s).

    Pairwise rules are evaluated on neighbouring grid points; for rule (ii)
    that is equivalent to all pairs, since it states that ``tau`` increases.
    Grid end values stand in for ``D(+inf)`` and ``D(-inf)``.
    """
    q, D, tau = ex.q, ex.D, ex.tau
    out = []
    # round-off in D must not flip the monotone case of the reduced rule
    tol = 1e-12 * max(1.0, float(np.nanmax(np.abs(D))))
    for k in np.flatnonzero(~(D > 0)):
        out.append(Violation("positive", float(q[k]), None, f"D={D[k]:.6g}"))
    for k in range(q.size - 1):
        qa, qb = q[k], q[k + 1]
        if not tau[k + 1] > tau[k]:
            out.append(Violation("tau_increasing", float(qa), float(qb),
                                 f"(q'-1)D(q')={tau[k + 1]:.6g} <= (q-1)D(q)={tau[k]:.6g}"))
        if qa != 0 and qb != 0:
            ra, rb = tau[k] / qa, tau[k + 1] / qb
            if D[k + 1] <= D[k] + tol:
                good, sense = rb > ra, ">"
            else:
                good, sense = rb < ra, "<"
            if not good:
                out.append(Violation("reduced_monotone", float(qa), float(qb),
                                     f"expected (q'-1)/q' D(q') {sense} (q-1)/q D(q): {rb:.6g} vs {ra:.6g}"))
    d_pinf, d_minf = D[-1], D[0]
    for k in range(q.size):
        qk = q[k]
        if qk > 1 and not D[k] < qk / (qk - 1) * d_pinf:
            out.append(Violation("upper_bound", float(qk), float(q[-1]),
                                 f"D={D[k]:.6g} >= q/(q-1) D(+inf)={qk / (qk - 1) * d_pinf:.6g}"))
        if qk < 0 and not D[k] > qk / (qk - 1) * d_minf:
            out.append(Violation("lower_bound", float(qk), float(q[0]),
                                 f"D={D[k]:.6g} <= q/(q-1) D(-inf)={qk / (qk - 1) * d_minf:.6g}"))
    return out


def asymptote_diagnostics(ex: ExponentSet) -> dict:
    """``alpha - D`` at the grid ends (equal in the limit when ``D'`` decays fast)."""
    return {"alpha_minus_D_at_qmax": float(ex.alpha[-1] - ex.D[-1]),
            "alpha_minus_D_at_qmin": float(ex.alpha[0] - ex.D[0])}


def chord_deviation(q, tau, q_lo: float = -5.0, q_hi: float = 5.0):
    """Deviation of ``tau`` from the straight chord joining its values at ``q_lo`` and ``q_hi``.

    Works on a single curve or on a stack of curves (rows).
    """
    q = np.asarray(q, dtype=float)
    tau = np.atleast_2d(tau)
    lo = int(np.argmin(np.abs(q - q_lo)))
    hi = int(np.argmin(np.abs(q - q_hi)))
    sel = slice(lo, hi + 1)
    w = (q[sel] - q[lo]) / (q[hi] - q[lo])
    chord = tau[:, [lo]] * (1 - w) + tau[:, [hi]] * w
    dev = tau[:, sel] - chord
    return q[sel], dev if dev.shape[0] > 1 else dev[0]


def tau_curvature(q, tau, q_lo: float = -5.0, q_hi: float = 5.0) -> float:
    """Largest absolute deviation of ``tau`` from its chord on ``[q_lo, q_hi]``."""
    return float(np.max(np.abs(chord_deviation(q, tau, q_lo, q_hi)[1])))


__all__ = [
    "Branch", "BranchSet", "ContactDiagnostics", "Crossing", "ExponentSet", "InformationDiagnostics",
    "PhaseDiagram", "TurningPoint", "Violation", "asymptote_diagnostics", "bounds_check",
    "branch_interpolant", "chord_deviation", "classify_phases", "contact_check", "derivative_matrix",
    "exponents", "find_turning_points", "identity_residuals", "information_diagnostics",
    "segment_branches", "tau_curvature",
]
