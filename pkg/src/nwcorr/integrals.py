"""Momentum integrals I1, I2, I3 for one detector.

For a single-particle wave function ``phi`` and a detector kernel
``Delta`` the three integral families are

    I1       = int d3k' d3k  (m+k0)(m+k'0) g(k, k')
    I2^i     = int d3k' d3k  k^i (m+k'0)   g(k, k')
    I3^{ij}  = int d3k' d3k  k^i k'^j      g(k, k')

with ``g = Delta(k' - k) conj(phi(k')) phi(k) / sqrt(k0 (m+k0) k'0 (m+k'0))``.
The fixed-direction reduction replaces both momenta by points ``t n`` and
``u n`` on one ray and collapses the integrals to 2D.

Every estimate is accompanied by an error estimate. Double sums are
evaluated as dense matrix contractions in node order, so results are
bitwise reproducible for a given node set.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from .amplitude import amplitude_matrices, sigma_dot
from .detector import AllSpace, delta_kernel, extent_along
from .exceptions import AccuracyError, AccuracyWarning, DistributionalKernelError, DomainError
from .kinematics import as_unit, check_mass, energy
from .wavepacket import Gaussian, GaussianPacket, Rectangular, profile_eval, support_bounds

EPS = np.finfo(float).eps
ROUNDOFF_FACTOR = 16.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Numerical settings shared by all integral evaluations.

    Parameters
    ----------
    nodes_1d : int
        Gauss-Legendre nodes per axis of the 2D fixed-direction rule (>= 8;
        must also meet the oscillation bound, see :func:`min_nodes_1d`).
    truncation_tail : float
        Profile mass discarded when truncating ``[0, inf)``.
    max_refinements : int
        Extra node doublings allowed when the error target is missed.
    target_rel_error : float
        Requested relative error of the integrals.
    nodes_3d : int
        Nodes per axis of the 3D momentum grids of the general regime
        (spherical grids put four times as many nodes on the radial axis).
    node_cap : int
        Largest number of kernel evaluations (node pairs) for tensor
        quadrature in the general regime; above it stratified Monte Carlo is used.
    mc_replicates, mc_seed : int
        Independent Monte Carlo replicates and their RNG seed.
    """

    nodes_1d: int = 64
    truncation_tail: float = 1e-10
    max_refinements: int = 2
    target_rel_error: float = 1e-8
    nodes_3d: int = 6
    node_cap: int = 5_000_000
    mc_replicates: int = 8
    mc_seed: int = 0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))

    def problems(self):
        out = []
        if not (isinstance(self.nodes_1d, (int, np.integer)) and self.nodes_1d >= 8):
            out.append(f"nodes_1d must be an integer >= 8, got {self.nodes_1d!r}")
        if not 0.0 < self.truncation_tail < 1.0:
            out.append(f"truncation_tail must lie in (0, 1), got {self.truncation_tail!r}")
        if not (isinstance(self.max_refinements, (int, np.integer)) and self.max_refinements >= 0):
            out.append(f"max_refinements must be an integer >= 0, got {self.max_refinements!r}")
        if not self.target_rel_error > 0:
            out.append(f"target_rel_error must be > 0, got {self.target_rel_error!r}")
        if not (isinstance(self.nodes_3d, (int, np.integer)) and self.nodes_3d >= 2):
            out.append(f"nodes_3d must be an integer >= 2, got {self.nodes_3d!r}")
        if not (isinstance(self.node_cap, (int, np.integer)) and self.node_cap >= 1):
            out.append(f"node_cap must be a positive integer, got {self.node_cap!r}")
        if not (isinstance(self.mc_replicates, (int, np.integer)) and self.mc_replicates >= 2):
            out.append(f"mc_replicates must be an integer >= 2, got {self.mc_replicates!r}")
        return out


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Quadrature nodes ``points`` (n, 3) with weights ``weights`` (n,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise DomainError("grid points and weights differ in length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class MomentumIntegrals:
    """I1 (scalar), I2 (3-vector), I3 (3x3) for one detector, with error estimates.

    For the fixed-direction reduction ``direction`` is set and ``scalars``
    holds the 1D-pair values ``(I1, I2, I3)`` along it; then
    ``i2 = I2 * n`` and ``i3 = I3 * outer(n, n)``.
    """

    i1: complex
    i2: np.ndarray
    i3: np.ndarray
    i1_error: float
    i2_error: np.ndarray
    i3_error: np.ndarray
    detector: object
    direction: np.ndarray | None = None
    scalars: tuple | None = None
    scalar_errors: tuple | None = None
    method: str = "tensor"
    n_nodes: int = 0
    warning: str | None = None

    @property
    def rel_error(self):
        """Largest error estimate relative to ``|I1|``, the dominant integral."""
        worst = max(self.i1_error, float(np.max(self.i2_error)), float(np.max(self.i3_error)))
        return worst / abs(self.i1) if self.i1 != 0 else math.inf

    def flat(self):
        """Values and errors as flat arrays (13 complex values, 13 errors)."""
        values = np.concatenate([[self.i1], self.i2, self.i3.ravel()])
        errs = np.concatenate([[self.i1_error], self.i2_error, self.i3_error.ravel()])
        return values, errs

    def scaled(self, factor):
        """The integrals of ``sqrt(factor) * phi``."""
        kw = dict(self.__dict__)
        kw.update(i1=self.i1 * factor, i2=self.i2 * factor, i3=self.i3 * factor,
                  i1_error=self.i1_error * factor, i2_error=self.i2_error * factor,
                  i3_error=self.i3_error * factor)
        if self.scalars is not None:
            kw["scalars"] = tuple(s * factor for s in self.scalars)
            kw["scalar_errors"] = tuple(e * factor for e in self.scalar_errors)
        return MomentumIntegrals(**kw)


# -- grids -------------------------------------------------------------------


def gauss_legendre(n, lo, hi):
    """``n``-point Gauss-Legendre nodes and weights on ``[lo, hi]``."""
    x, w = roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def cartesian_grid(lo, hi, n):
    """Tensor Gauss-Legendre grid on the box ``[lo, hi]`` (3-vectors), ``n`` nodes per axis."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (3,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (3,))
    axes = [gauss_legendre(n, lo[i], hi[i]) for i in range(3)]
    pts = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", *[a[1] for a in axes]).ravel()
    return MomentumGrid(pts, w)


def hermite_grid(center, sigma, n):
    """Gauss-Hermite grid matched to ``exp(-|k - center|**2 / (4 sigma**2))``.

    Weights absorb the inverse Gaussian, so a plain weighted sum of
    ``packet(k) * g(k)`` integrates exactly when ``g`` is a polynomial of
    degree < 2n per axis.
    """
    y, w = roots_hermite(n)
    ys = np.stack(np.meshgrid(y, y, y, indexing="ij"), axis=-1).reshape(-1, 3)
    ws = np.einsum("i,j,k->ijk", w, w, w).ravel() * np.exp(np.einsum("ij,ij->i", ys, ys))
    scale = 2.0 * sigma
    return MomentumGrid(np.asarray(center, dtype=float) + scale * ys, ws * scale**3)


def _frame(axis):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2, axis


def spherical_grid(tmin, tmax, n_r, n_theta, n_phi, axis=(0.0, 0.0, 1.0), theta_max=np.pi):
    """Product rule in spherical coordinates around ``axis``.

    Radial and polar (in ``cos theta``) directions use Gauss-Legendre, the
    azimuth the periodic trapezoid rule. Restricting ``theta_max`` gives a
    polar cap. Weights include the ``r**2`` Jacobian.
    """
    r, wr = gauss_legendre(n_r, tmin, tmax)
    ct, wt = gauss_legendre(n_theta, np.cos(theta_max), 1.0)
    ph = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    wp = np.full(n_phi, 2.0 * np.pi / n_phi)
    e1, e2, e3 = _frame(axis)
    st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, None))
    unit = (st[:, None, None] * np.cos(ph)[None, :, None] * e1
            + st[:, None, None] * np.sin(ph)[None, :, None] * e2
            + ct[:, None, None] * e3)
    pts = r[:, None, None, None] * unit[None]
    w = (wr * r * r)[:, None, None] * wt[None, :, None] * wp[None, None, :]
    return MomentumGrid(pts.reshape(-1, 3), w.ravel())


# -- core contractions ---------------------------------------------------------


def _kernel_matrix(detector, primed, unprimed):
    """``K[j, i] = Delta(primed[j] - unprimed[i])``."""
    return delta_kernel(detector, primed[:, None, :] - unprimed[None, :, :])


def grid_integrals(phi_values, grid: MomentumGrid, detector, mass, grid_primed=None, phi_primed=None):
    """I1, I2, I3 as plain double sums over ``grid`` (and optionally a separate primed grid).

    Parameters
    ----------
    phi_values : array_like, shape (n,)
        Wave function at ``grid.points``.
    grid_primed, phi_primed : optional
        Independent node set for the primed momentum (used by Monte Carlo);
        defaults to the same nodes.

    Returns
    -------
    (J, floor) : 4x4 complex moment matrix and its rounding-error bound.
        ``J[0, 0] = I1``, ``J[1:, 0] = I2``, ``J[1:, 1:] = I3``.
    """
    if isinstance(detector, AllSpace):
        raise DistributionalKernelError("all-space kernel is a Dirac delta; use the sharp regime")
    mass = check_mass(mass)
    if grid_primed is None:
        grid_primed, phi_primed = grid, phi_values
    k = grid.points
    kp = grid_primed.points
    u = _feature_rows(k, mass) * (grid.weights * np.asarray(phi_values))[:, None]
    v = _feature_rows(kp, mass) * (grid_primed.weights * np.conj(np.asarray(phi_primed)))[:, None]
    K = _kernel_matrix(detector, kp, k)
    J = (K @ u).T @ v  # J[a, g] = sum_ji u[i, a] K[j, i] v[j, g]
    floor = ROUNDOFF_FACTOR * EPS * ((np.abs(K) @ np.abs(u)).T @ np.abs(v))
    return J, floor


def _feature_rows(k, mass):
    e = energy(mass, k)
    feats = np.concatenate([(mass + e)[:, None], k], axis=1)
    return feats / np.sqrt(e * (mass + e))[:, None]


def _integrals_from_moments(J, err, detector, **kw):
    return MomentumIntegrals(
        i1=complex(J[0, 0]), i2=J[1:, 0].copy(), i3=J[1:, 1:].copy(),
        i1_error=float(err[0, 0]), i2_error=err[1:, 0].copy(), i3_error=err[1:, 1:].copy(),
        detector=detector, **kw)


# -- fixed direction -----------------------------------------------------------


def min_nodes_1d(profile, direction, detector, truncation_tail=1e-10):
    """Smallest admissible ``nodes_1d`` for the fixed-direction rule.

    ``8 + ceil((tmax - tmin) * L / pi)`` where ``L`` is twice the largest
    ``|x . n|`` over the detector: this keeps at least two nodes per half
    period of the kernel across the truncated support.
    """
    tmin, tmax = support_bounds(profile, truncation_tail)
    L = extent_along(detector, direction)
    return 8 + int(math.ceil((tmax - tmin) * L / math.pi))


def _fixed_pass(profile, n_vec, detector, mass, n, tmin, tmax):
    t, w = gauss_legendre(n, tmin, tmax)
    f = profile_eval(profile, t)
    e = np.sqrt(mass * mass + t * t)
    s = t[:, None] - t[None, :]  # primed (rows) minus unprimed (columns)
    K = delta_kernel(detector, s[..., None] * n_vec)
    left = w * np.conj(f)            # primed node, momentum t
    right = w * f                    # unprimed node, momentum u
    a_rows = np.stack([left * (mass + e), left * (mass + e), left * t])
    b_cols = np.stack([right * (mass + e), right * t, right * t])
    vals = np.einsum("kj,ji,ki->k", a_rows, K, b_cols)
    floor = ROUNDOFF_FACTOR * EPS * np.einsum("kj,ji,ki->k", np.abs(a_rows), np.abs(K), np.abs(b_cols))
    return vals, floor


def fixed_direction_integrals(profile, direction, detector, mass, spec: QuadratureSpec = QuadratureSpec()):
    """Integrals for a wave function pinned to the ray along ``direction``.

    Evaluates

        I1 = int_0^inf dt du (m+E(t)) (m+E(u)) Delta((t-u) n) conj(f(t)) f(u)
        I2 = int_0^inf dt du u (m+E(t))        Delta((t-u) n) conj(f(t)) f(u)
        I3 = int_0^inf dt du t u               Delta((t-u) n) conj(f(t)) f(u)

    by tensor Gauss-Legendre on the truncated support. The rule is compared
    with the doubled rule; the doubled value is returned and the difference
    (plus a rounding bound) is the error estimate. Up to
    ``spec.max_refinements`` further doublings are made while the relative
    error exceeds ``spec.target_rel_error``; if it still does, an
    :class:`AccuracyWarning` is issued and recorded on the result.

    Raises
    ------
    DomainError
        Empty truncated support.
    AccuracyError
        ``spec.nodes_1d`` is below :func:`min_nodes_1d`.
    DistributionalKernelError
        ``detector`` is :class:`AllSpace`.
    """
    mass = check_mass(mass)
    n_vec = as_unit(direction, "direction")
    if isinstance(detector, AllSpace):
        raise DistributionalKernelError("all-space kernel is a Dirac delta; use the sharp regime")
    if not isinstance(profile, (Gaussian, Rectangular)):
        raise DomainError(f"unsupported radial profile {profile!r}")
    tmin, tmax = support_bounds(profile, spec.truncation_tail)
    if not tmax > tmin:
        raise DomainError(f"truncated support [{tmin}, {tmax}] is empty")
    required = min_nodes_1d(profile, n_vec, detector, spec.truncation_tail)
    if spec.nodes_1d < required:
        raise AccuracyError(
            f"nodes_1d={spec.nodes_1d} cannot resolve the kernel oscillation; the minimum admissible value is {required}"
        )
    n = int(spec.nodes_1d)
    coarse, _ = _fixed_pass(profile, n_vec, detector, mass, n, tmin, tmax)
    for attempt in range(spec.max_refinements + 1):
        fine, floor = _fixed_pass(profile, n_vec, detector, mass, 2 * n, tmin, tmax)
        err = np.abs(fine - coarse) + floor
        rel = float(np.max(err)) / abs(fine[0]) if fine[0] != 0 else math.inf
        if rel <= spec.target_rel_error:
            break
        if attempt < spec.max_refinements:
            n *= 2
            coarse = fine
    warning = None
    if rel > spec.target_rel_error:
        warning = f"fixed-direction quadrature relative error {rel:.3g} exceeds target {spec.target_rel_error:.3g}"
        warnings.warn(warning, AccuracyWarning, stacklevel=2)
    i1, i2, i3 = (complex(v) for v in fine)
    e1, e2, e3 = (float(v) for v in err)
    nn = np.outer(n_vec, n_vec)
    return MomentumIntegrals(
        i1=i1, i2=i2 * n_vec, i3=i3 * nn,
        i1_error=e1, i2_error=e2 * np.abs(n_vec), i3_error=e3 * np.abs(nn),
        detector=detector, direction=n_vec, scalars=(i1, i2, i3), scalar_errors=(e1, e2, e3),
        method="gauss-legendre-2d", n_nodes=2 * n, warning=warning)


# -- general (3D x 3D) ---------------------------------------------------------


def _default_grid(phi, spec, n):
    if isinstance(phi, (Gaussian, Rectangular)):
        tmin, tmax = support_bounds(phi, spec.truncation_tail)
        if not tmax > tmin:
            raise DomainError(f"truncated support [{tmin}, {tmax}] is empty")
        return spherical_grid(tmin, tmax, 4 * n, n, n)
    if isinstance(phi, GaussianPacket):
        return hermite_grid(phi.center, phi.sigma, n)
    raise DomainError("general_integrals needs an explicit grid for a callable wave function")


def _phi_callable(phi):
    if isinstance(phi, (Gaussian, Rectangular)):
        return lambda k: profile_eval(phi, np.linalg.norm(k, axis=-1))
    return phi


def _strata_samples(phi, spec, n_axis, rng):
    """One uniform sample per cell of an ``n_axis**3`` stratification of the support."""
    cells = (np.stack(np.meshgrid(*[np.arange(n_axis)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
             + rng.random((n_axis**3, 3))) / n_axis
    if isinstance(phi, (Gaussian, Rectangular)):
        tmin, tmax = support_bounds(phi, spec.truncation_tail)
        r = tmin + (tmax - tmin) * cells[:, 0]
        ct = -1.0 + 2.0 * cells[:, 1]
        ph = 2.0 * np.pi * cells[:, 2]
        st = np.sqrt(1.0 - ct * ct)
        pts = r[:, None] * np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
        w = (tmax - tmin) * 2.0 * 2.0 * np.pi * r * r / n_axis**3
        return MomentumGrid(pts, w)
    lo, hi = phi.box_bounds(spec.truncation_tail)
    pts = lo + (hi - lo) * cells
    return MomentumGrid(pts, np.full(len(pts), np.prod(hi - lo) / n_axis**3))


def _monte_carlo(phi, detector, mass, spec):
    evaluate = _phi_callable(phi)
    rng = np.random.default_rng(spec.mc_seed)
    n_axis = max(2, int((spec.node_cap / spec.mc_replicates) ** (1.0 / 6.0)))
    reps = []
    for _ in range(spec.mc_replicates):
        g1 = _strata_samples(phi, spec, n_axis, rng)
        g2 = _strata_samples(phi, spec, n_axis, rng)
        J, _ = grid_integrals(evaluate(g1.points), g1, detector, mass, g2, evaluate(g2.points))
        reps.append(J)
    reps = np.array(reps)
    mean = reps.mean(axis=0)
    stderr = np.sqrt(reps.real.var(axis=0, ddof=1) + reps.imag.var(axis=0, ddof=1) + 0j).real
    stderr /= np.sqrt(spec.mc_replicates)
    return mean, stderr, n_axis**3


def general_integrals(phi, detector, mass, spec: QuadratureSpec = QuadratureSpec(), grid=None):
    """Full 3D x 3D integrals for a single-particle wave function.

    Parameters
    ----------
    phi : Gaussian, Rectangular, GaussianPacket or callable
        A radial profile means the isotropic wave function ``f(|k|)``; a
        callable takes (n, 3) momenta and then ``grid`` is required.
    grid : MomentumGrid, optional
        Evaluate the double sum on exactly these nodes; the error estimate
        is then only the rounding bound.

    Without ``grid`` a spherical (radial profiles) or Gauss-Hermite
    (``GaussianPacket``) tensor rule with ``spec.nodes_3d`` nodes per axis
    is compared with the rule using two more nodes per axis, refining up to
    ``spec.max_refinements`` times. If the number of kernel evaluations
    would exceed ``spec.node_cap``, stratified Monte Carlo with
    ``spec.mc_replicates`` independent replicates is used instead and the
    standard error becomes the error estimate.
    """
    mass = check_mass(mass)
    if isinstance(detector, AllSpace):
        raise DistributionalKernelError("all-space kernel is a Dirac delta; use the sharp regime")
    evaluate = _phi_callable(phi)
    if grid is not None:
        J, floor = grid_integrals(evaluate(grid.points), grid, detector, mass)
        return _integrals_from_moments(J, floor, detector, method="grid", n_nodes=len(grid))

    n = int(spec.nodes_3d)
    per_momentum = lambda m: len(_default_grid(phi, spec, m))  # noqa: E731
    if per_momentum(n + 2) ** 2 > spec.node_cap:
        J, err, count = _monte_carlo(phi, detector, mass, spec)
        method, warning = "stratified-monte-carlo", None
        rel = float(np.max(err)) / abs(J[0, 0])
        if rel > spec.target_rel_error:
            warning = f"Monte Carlo relative error {rel:.3g} exceeds target {spec.target_rel_error:.3g}"
            warnings.warn(warning, AccuracyWarning, stacklevel=2)
        return _integrals_from_moments(J, err, detector, method=method, n_nodes=count, warning=warning)

    g = _default_grid(phi, spec, n)
    coarse, _ = grid_integrals(evaluate(g.points), g, detector, mass)
    for attempt in range(spec.max_refinements + 1):
        g = _default_grid(phi, spec, n + 2)
        fine, floor = grid_integrals(evaluate(g.points), g, detector, mass)
        err = np.abs(fine - coarse) + floor
        rel = float(np.max(err)) / abs(fine[0, 0])
        if rel <= spec.target_rel_error or attempt == spec.max_refinements:
            break
        if per_momentum(n + 4) ** 2 > spec.node_cap:
            break
        n += 2
        coarse = fine
    warning = None
    if rel > spec.target_rel_error:
        warning = f"3D tensor quadrature relative error {rel:.3g} exceeds target {spec.target_rel_error:.3g}"
        warnings.warn(warning, AccuracyWarning, stacklevel=2)
    return _integrals_from_moments(fine, err, detector, method="tensor-3d", n_nodes=len(g), warning=warning)


# -- brute-force oracle --------------------------------------------------------


@dataclass(frozen=True)
class PairMoments:
    numerator: complex
    denominator: complex

    @property
    def correlation(self):
        return 4.0 * self.numerator / self.denominator


def brute_force_pair_moments(phi, detA, detB, a, b, mass, grid_a: MomentumGrid, grid_b: MomentumGrid | None = None,
                             max_block=2_000_000):
    """Direct Riemann sums of the correlation numerator and denominator.

    Sums over all (k, p, k', p') node quadruples of ``grid_a x grid_b`` with
    the spin traces formed by explicit 2x2 matrix products; nothing relies
    on ``phi`` factorizing. The numerator carries its 1/4 spin prefactor,
    so ``4 * numerator / denominator`` is the correlation.

    Parameters
    ----------
    phi : callable
        ``phi(k, p)`` for momentum arrays of shape (n, 3); returns (n,) complex.
    grid_a, grid_b : MomentumGrid
        Nodes for the first and second particle (``grid_b`` defaults to ``grid_a``).
    max_block : int
        Largest number of (primed, unprimed) pair combinations held in memory at once.
    """
    mass = check_mass(mass)
    a = as_unit(a, "a")
    b = as_unit(b, "b")
    grid_b = grid_a if grid_b is None else grid_b
    ia, ib = (idx.ravel() for idx in np.meshgrid(np.arange(len(grid_a)), np.arange(len(grid_b)), indexing="ij"))
    k = grid_a.points[ia]
    p = grid_b.points[ib]
    # kernels tabulated once per node pair of each particle's grid
    KA = _kernel_matrix(detA, grid_a.points, grid_a.points)
    KB = _kernel_matrix(detB, grid_b.points, grid_b.points)
    w = grid_a.weights[ia.ravel()] * grid_b.weights[ib.ravel()]
    c = w * np.asarray(phi(k, p), dtype=complex) / np.sqrt(4.0 * energy(mass, k) * energy(mass, p))
    M = amplitude_matrices(k, p, mass)
    spin = sigma_dot(a) @ M @ sigma_dot(b).T
    m_flat = M.reshape(-1, 4)
    s_flat = spin.reshape(-1, 4)
    num = 0j
    den = 0j
    chunk = max(1, max_block // len(k))
    for lo in range(0, len(k), chunk):
        sl = slice(lo, lo + chunk)  # primed pairs
        t_ab = np.conj(m_flat[sl]) @ s_flat.T      # Tr{S_P M_P'^dagger}, rows P', columns P
        t_pl = np.conj(m_flat[sl]) @ m_flat.T
        kern = KA[ia[sl]][:, ia] * KB[ib[sl]][:, ib]
        weight = np.conj(c[sl])[:, None] * c[None, :] * kern
        num += np.sum(weight * t_ab)
        den += np.sum(weight * t_pl)
    return PairMoments(0.25 * num, den)
