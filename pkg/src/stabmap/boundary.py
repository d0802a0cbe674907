"""Augmented boundary system: pin a ray's exact stability crossing.

For a ray k(s) = k0 + s*d(theta) in the normalized parameter plane, the
boundary crossing solves the square system

    f(x, k(s))            = 0        equilibrium           (n rows)
    J(x, k(s)) u + w v    = 0        critical eigenpair    (n rows)
    J(x, k(s)) v - w u    = 0                              (n rows)
    u'u + v'v - 1         = 0        eigenvector scale     (1 row)
    v_p                   = 0        eigenvector phase     (1 row)

in the unknowns z = (x, v, u, s, w).  u + jv is then an eigenvector of J
with eigenvalue +jw; w = 0 degenerates to a fold (v = 0, u a null vector),
so one corrector covers both crossing types.  The phase row is not part of
the printed formulation, which is underdetermined by the eigenvector phase;
anchoring one component of v at zero closes the count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NoEquilibrium, NumericalError, StructuralError

CORRECTOR_FTOL = 1e-8
CORRECTOR_MAX_ITER = 40
BISECTION_STOL = 1e-6
FOLD_OMEGA_TOL = 1e-6
_DIR_EPS = 1e-12


@dataclass(frozen=True)
class ParameterPlane:
    """Two sweep parameters, normalized so each axis spans about one unit.

    Coordinates throughout are the normalized ones (original value / delta).
    `axes` holds the parameter paths for spec-backed planes, or plain labels
    for synthetic systems.
    """

    axes: tuple
    delta: tuple
    k_lb: tuple
    k_ub: tuple
    k0: tuple

    def __post_init__(self):
        for name in ("delta", "k_lb", "k_ub", "k0"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.axes) != 2:
            raise StructuralError("a parameter plane needs exactly two axes")
        if any(d <= 0 for d in self.delta):
            raise StructuralError("plane normalization scale must be positive")

    def to_original(self, k):
        return np.asarray(k, dtype=float) * np.asarray(self.delta)

    def contains(self, k, tol=1e-12):
        k = np.asarray(k, dtype=float)
        return bool(np.all(k >= np.asarray(self.k_lb) - tol)
                    and np.all(k <= np.asarray(self.k_ub) + tol))


def normalize_plane(axes, original_bounds, anchor_original) -> ParameterPlane:
    """Build a ParameterPlane from original-unit bounds and anchor.

    Each axis is scaled by its admissible width, k = k_orig / delta, so the
    normalized box has unit width per axis.
    """
    axes = tuple(axes)
    lows = [float(b[0]) for b in original_bounds]
    highs = [float(b[1]) for b in original_bounds]
    anchor = [float(a) for a in anchor_original]
    for lo, hi, a in zip(lows, highs, anchor):
        if not lo < hi:
            raise StructuralError(f"bounds ({lo}, {hi}) are not ordered")
        if not lo < a < hi:
            raise StructuralError(f"anchor {a} outside bounds ({lo}, {hi})")
    delta = tuple(hi - lo for lo, hi in zip(lows, highs))
    return ParameterPlane(
        axes=axes,
        delta=delta,
        k_lb=tuple(lo / d for lo, d in zip(lows, delta)),
        k_ub=tuple(hi / d for hi, d in zip(highs, delta)),
        k0=tuple(a / d for a, d in zip(anchor, delta)),
    )


def direction(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def smax(plane: ParameterPlane, theta: float) -> float:
    """Exact distance from the anchor to the normalized box edge along theta."""
    k0 = np.asarray(plane.k0)
    lb, ub = np.asarray(plane.k_lb), np.asarray(plane.k_ub)
    if np.any(k0 <= lb) or np.any(k0 >= ub):
        raise StructuralError("plane anchor is not strictly inside the box")
    d = direction(theta)
    t = math.inf
    for i in range(2):
        if d[i] > _DIR_EPS:
            t = min(t, (ub[i] - k0[i]) / d[i])
        elif d[i] < -_DIR_EPS:
            t = min(t, (lb[i] - k0[i]) / d[i])
    return float(t)


@dataclass
class BoundaryPoint:
    theta: float
    s_star: float
    k_star: np.ndarray          # normalized plane coordinates
    omega_star: float           # rad/s; 0 for folds, NaN for box exits
    freq_hz: float
    status: str                 # hopf | fold | box_exit | no_equilibrium | corrector_failed
    residual: float
    eigvec_u: np.ndarray = None
    eigvec_v: np.ndarray = None
    x_star: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


class BoundarySystem:
    """One ray of the augmented boundary problem.

    Wraps the model callbacks: `f(x, k)` (batched over state columns),
    `jac(x, k)`, and `solve_eq(k, x_guess)` returning an equilibrium state.
    `k` is always the normalized 2-vector; spec-backed systems convert to
    original units internally.
    """

    def __init__(self, f, jac, solve_eq, n, plane, theta):
        self.f = f
        self.jac = jac
        self.solve_eq = solve_eq
        self.n = int(n)
        self.plane = plane
        self.theta = float(theta)
        self.d = direction(theta)
        self.k0 = np.asarray(plane.k0, dtype=float)

    def k_of_s(self, s) -> np.ndarray:
        # direction constraint k = k0 + s d(theta), exact by construction
        return self.k0 + s * self.d

    # --- packing -----------------------------------------------------------
    def pack(self, x, v, u, s, w):
        return np.concatenate([x, v, u, [s, w]])

    def unpack(self, z):
        n = self.n
        return z[:n], z[n:2 * n], z[2 * n:3 * n], float(z[3 * n]), float(z[3 * n + 1])

    # --- residual and Jacobian --------------------------------------------
    def residual_F(self, z, p) -> np.ndarray:
        x, v, u, s, w = self.unpack(z)
        k = self.k_of_s(s)
        J = self.jac(x, k)
        return np.concatenate([
            self.f(x, k),
            J @ u + w * v,
            J @ v - w * u,
            [u @ u + v @ v - 1.0],
            [v[p]],
        ])

    def _dJw_dx(self, x, k, w):
        """d(J(x) w)/dx by differencing the exact directional derivative."""
        n = self.n
        t = 1e-4 / max(1.0, float(np.linalg.norm(w)))
        h = 1e-4 * np.maximum(1.0, np.abs(x))
        shifts = np.diag(h)
        base = 1j * t * w[:, None]
        Fp = self.f(x[:, None] + shifts + base, k)
        Fm = self.f(x[:, None] - shifts + base, k)
        return (Fp.imag - Fm.imag) / (2.0 * t * h)[None, :]

    def jacobian_F(self, z, p) -> np.ndarray:
        x, v, u, s, w = self.unpack(z)
        n = self.n
        k = self.k_of_s(s)
        J = self.jac(x, k)
        hs = 1e-6 * max(1.0, abs(s))
        kp, km = self.k_of_s(s + hs), self.k_of_s(s - hs)
        df_ds = (self.f(x, kp) - self.f(x, km)) / (2.0 * hs)
        dJ_ds = (self.jac(x, kp) - self.jac(x, km)) / (2.0 * hs)
        dJu_ds = dJ_ds @ u
        dJv_ds = dJ_ds @ v
        A21 = self._dJw_dx(x, k, u)
        A31 = self._dJw_dx(x, k, v)

        Z = np.zeros((n, n))
        top = np.block([
            [J, Z, Z],
            [A21, w * np.eye(n), J],
            [A31, J, -w * np.eye(n)],
        ])
        col_s = np.concatenate([df_ds, dJu_ds, dJv_ds])
        col_w = np.concatenate([np.zeros(n), v, -u])
        row_norm = np.concatenate([np.zeros(n), 2.0 * v, 2.0 * u, [0.0, 0.0]])
        row_anchor = np.zeros(3 * n + 2)
        row_anchor[n + p] = 1.0
        out = np.zeros((3 * n + 2, 3 * n + 2))
        out[:3 * n, :3 * n] = top
        out[:3 * n, 3 * n] = col_s
        out[:3 * n, 3 * n + 1] = col_w
        out[3 * n] = row_norm
        out[3 * n + 1] = row_anchor
        return out


def toy_boundary_system(f, n, plane, theta) -> BoundarySystem:
    """BoundarySystem around a plain numpy rhs f(x, k) for small test models.

    f must broadcast over state columns and accept complex states (holomorphic
    expressions); the Jacobian comes from a complex step and equilibria from
    undamped dense Newton.
    """

    def jac(x, k):
        h = 1e-100
        X = np.asarray(x, dtype=float)[:, None] + 1j * h * np.eye(n)
        return np.asarray(f(X, k)).imag / h

    def solve_eq(k, x_guess):
        x = np.array(x_guess if x_guess is not None else np.zeros(n), dtype=float)
        for _ in range(60):
            r = np.atleast_1d(np.asarray(f(x, k), dtype=float))
            if np.max(np.abs(r)) <= 1e-12:
                return x
            try:
                x = x + np.linalg.solve(jac(x, k), -r)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(x)):
                break
        r = np.atleast_1d(np.asarray(f(x, k), dtype=float)) if np.all(np.isfinite(x)) else np.array([np.inf])
        if np.max(np.abs(r)) <= 1e-9:
            return x
        raise NoEquilibrium("toy equilibrium did not converge",
                            best_residual=float(np.max(np.abs(r))))

    return BoundarySystem(f=f, jac=jac, solve_eq=solve_eq, n=n,
                          plane=plane, theta=theta)


def seed_from_eigvec(w_vec):
    """Normalize a complex eigenvector into (u, v, p) with v[p] = 0 exactly."""
    w_vec = np.asarray(w_vec, dtype=complex)
    w_vec = w_vec / np.linalg.norm(w_vec)
    p = int(np.argmax(np.abs(w_vec.real)))
    if abs(w_vec[p]) < 1e-12:
        p = int(np.argmax(np.abs(w_vec)))
    w_vec = w_vec * np.exp(-1j * np.angle(w_vec[p]))
    return w_vec.real.copy(), w_vec.imag.copy(), p


@dataclass
class Bracket:
    """Predictor output: last stable distance and first non-stable one."""

    s_lo: float
    s_hi: float
    x_lo: np.ndarray
    x_hi: np.ndarray = None       # None when the equilibrium vanished at s_hi
    sigma_lo: float = None        # max Re(lambda) at the ends, when known
    sigma_hi: float = None
    lam_crit: complex = None      # critical eigenvalue at the unstable end
    eigvec: np.ndarray = None


def _newton_F(sys: BoundarySystem, z0, p, max_iter=CORRECTOR_MAX_ITER):
    z = np.asarray(z0, dtype=float).copy()
    history = []
    F = sys.residual_F(z, p)
    norm = float(np.max(np.abs(F)))
    for _ in range(max_iter):
        history.append(norm)
        if norm <= CORRECTOR_FTOL:
            return z, norm, history, True
        Jz = sys.jacobian_F(z, p)
        try:
            lu = scipy.linalg.lu_factor(Jz)
            dz = scipy.linalg.lu_solve(lu, -F)
        except (scipy.linalg.LinAlgError, ValueError):
            return z, norm, history, False
        nat0 = float(np.linalg.norm(dz))
        lam = 1.0
        while True:
            z_try = z + lam * dz
            try:
                F_try = sys.residual_F(z_try, p)
                nat = float(np.linalg.norm(scipy.linalg.lu_solve(lu, -F_try)))
                ok = np.all(np.isfinite(F_try)) and nat <= (1.0 - 0.25 * lam) * nat0
            except Exception:
                ok = False
            if ok:
                break
            lam *= 0.5
            if lam < 2.0 ** -20:
                return z, norm, history, False
        z, F = z_try, F_try
        norm = float(np.max(np.abs(F)))
    return z, norm, history, norm <= CORRECTOR_FTOL


def _critical_mode(J):
    w, vr = scipy.linalg.eig(J, right=True)
    i = int(np.argmax(w.real))
    lam = w[i]
    if lam.imag < 0.0:  # pick the conjugate with Im >= 0
        conj = np.argmin(np.abs(w - lam.conjugate()))
        lam, i = w[conj], conj
    return lam, vr[:, i]


def _max_re(J):
    return float(np.max(scipy.linalg.eigvals(J).real))


def _bisect_bracket(sys, br: Bracket, stol=BISECTION_STOL):
    """Shrink [s_lo, s_hi] by sign of max Re(lambda); NoEquilibrium counts as unstable."""
    s_lo, s_hi, x_lo = br.s_lo, br.s_hi, br.x_lo
    x_hi, sigma_hi, lam, vec = br.x_hi, br.sigma_hi, br.lam_crit, br.eigvec
    while s_hi - s_lo > stol:
        s_mid = 0.5 * (s_lo + s_hi)
        try:
            x_mid = sys.solve_eq(sys.k_of_s(s_mid), x_lo)
        except NoEquilibrium:
            s_hi, x_hi = s_mid, None
            continue
        J = sys.jac(x_mid, sys.k_of_s(s_mid))
        lam_mid, vec_mid = _critical_mode(J)
        if lam_mid.real > 0.0:
            s_hi, x_hi, lam, vec = s_mid, x_mid, lam_mid, vec_mid
            sigma_hi = lam_mid.real
        else:
            s_lo, x_lo = s_mid, x_mid
    return Bracket(s_lo, s_hi, x_lo, x_hi, None, sigma_hi, lam, vec)


def _build_seed(sys, br: Bracket):
    """Interpolated s, nearby equilibrium, and eigen-triplet seed."""
    if br.sigma_lo is not None and br.sigma_hi is not None and br.sigma_hi > 0:
        frac = br.sigma_lo / (br.sigma_lo - br.sigma_hi)
        s_seed = br.s_lo + np.clip(frac, 0.05, 0.95) * (br.s_hi - br.s_lo)
    else:
        s_seed = 0.5 * (br.s_lo + br.s_hi)
    x_seed = br.x_hi if br.x_hi is not None else br.x_lo
    if br.lam_crit is not None and br.eigvec is not None:
        lam, vec = br.lam_crit, br.eigvec
    else:
        lam, vec = _critical_mode(sys.jac(x_seed, sys.k_of_s(
            br.s_hi if br.x_hi is not None else br.s_lo)))
    u, v, p = seed_from_eigvec(vec)
    w_seed = abs(lam.imag)
    return s_seed, x_seed, u, v, p, w_seed


def correct(sys: BoundarySystem, bracket: Bracket, anchor_index=None) -> BoundaryPoint:
    """Newton-solve the augmented system from a predictor bracket.

    Falls back to sign bisection over the bracket and a Newton restart when
    the first attempt diverges; a bracket whose equilibrium vanished is
    seeded as a fold (w = 0, v = 0).
    """
    diag = {"bracket": (bracket.s_lo, bracket.s_hi), "residuals": []}

    def attempt(br):
        s_seed, x_seed, u, v, p, w_seed = _build_seed(sys, br)
        if br.x_hi is None:
            v = np.zeros_like(v)
            w_seed = 0.0
            u = u / np.linalg.norm(u)
        if anchor_index is not None:
            p = int(anchor_index)
            # re-rotate the seed so v[p] = 0 holds at the start
            wv = (u + 1j * v)
            if abs(wv[p]) > 1e-12:
                wv = wv * np.exp(-1j * np.angle(wv[p]))
                u, v = wv.real.copy(), wv.imag.copy()
        z0 = sys.pack(x_seed, v, u, s_seed, w_seed)
        z, norm, hist, ok = _newton_F(sys, z0, p)
        diag["residuals"].append(hist)
        return z, norm, ok, p

    z, norm, ok, p = attempt(bracket)
    if not ok:
        refined = _bisect_bracket(sys, bracket)
        diag["bisected_bracket"] = (refined.s_lo, refined.s_hi)
        z, norm, ok, p = attempt(refined)
        if not ok:
            mid = 0.5 * (refined.s_lo + refined.s_hi)
            status = "no_equilibrium" if bracket.x_hi is None else "corrector_failed"
            return BoundaryPoint(
                theta=sys.theta, s_star=mid, k_star=sys.k_of_s(mid),
                omega_star=math.nan, freq_hz=math.nan, status=status,
                residual=norm, diagnostics=diag,
            )
    x, v, u, s, w = sys.unpack(z)
    if w < 0.0:  # (w, u, v) -> (-w, u, -v) symmetry
        w, v = -w, -v
    if w < FOLD_OMEGA_TOL:
        status, w, freq = "fold", 0.0, 0.0
    else:
        status, freq = "hopf", w / (2.0 * math.pi)
    return BoundaryPoint(
        theta=sys.theta, s_star=float(s), k_star=sys.k_of_s(s),
        omega_star=float(w), freq_hz=float(freq), status=status,
        residual=float(norm), eigvec_u=u, eigvec_v=v, x_star=x,
        diagnostics=diag,
    )
