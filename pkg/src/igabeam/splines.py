"""Univariate B-spline spaces (open and periodic) and Gauss-Legendre quadrature.

The periodic spaces live on a uniform partition of ``[0, 2*pi]`` and are built
by cyclic identification: every basis function is a translate of one mother
spline and evaluation returns global indices reduced modulo the space
dimension.  Open spaces use a clamped uniform knot vector.  Everything is
plain double precision and immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KnotVector",
    "QuadratureRule",
    "SplineSpace",
    "gauss_rule",
    "make_open_space",
    "make_periodic_space",
]


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on the reference element [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def n_points(self) -> int:
        return self.nodes.size

    def mapped(self, a: float, b: float):
        """Nodes and weights mapped to the interval [a, b]."""
        x = 0.5 * (b - a) * self.nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * self.weights
        return x, w


def gauss_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n_points`` nodes on [-1, 1].

    Nodes are the roots of the Legendre polynomial P_n, computed by Newton
    iteration on the three-term recurrence (tolerance 1e-15), so any order up
    to 30 is available without tabulated constants.
    """
    if not 1 <= n_points <= 30:
        raise ValueError(f"gauss_rule: n_points must be in [1, 30], got {n_points}")
    n = n_points
    if n == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]))

    k = np.arange(n)
    # Chebyshev-like initial guess for the roots of P_n
    x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        # derivative of P_n from the recurrence
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise RuntimeError("gauss_rule: Newton iteration did not converge")

    # final polynomial values for the weights
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    order = np.argsort(x)
    return QuadratureRule(x[order], w[order])


# ---------------------------------------------------------------------------
# B-spline kernels (see Piegl & Tiller, algorithms A2.1 and A2.3)
# ---------------------------------------------------------------------------

def _find_span(knots: np.ndarray, degree: int, x: float) -> int:
    """Index i with knots[i] <= x < knots[i+1], clamped to the valid range."""
    low = degree
    high = len(knots) - 1 - degree
    if x <= knots[low]:
        return low
    if x >= knots[high]:
        return high - 1
    span = (low + high) // 2
    while x < knots[span] or x >= knots[span + 1]:
        if x < knots[span]:
            high = span
        else:
            low = span
        span = (low + high) // 2
    return span


def _basis_ders(knots: np.ndarray, degree: int, x: float, span: int,
                n_ders: int) -> np.ndarray:
    """Nonzero basis functions and derivatives at ``x``.

    Returns an array of shape ``(n_ders + 1, degree + 1)`` whose row ``k``
    holds the k-th derivatives of the ``degree + 1`` splines that are nonzero
    on the span.  Computes in the dtype of ``knots`` (extended precision
    propagates when the caller requests it).
    """
    p = degree
    dt = knots.dtype
    ndu = np.empty((p + 1, p + 1), dtype=dt)
    a = np.empty((2, p + 1), dtype=dt)
    ders = np.zeros((n_ders + 1, p + 1), dtype=dt)
    left = np.empty(p, dtype=dt)
    right = np.empty(p, dtype=dt)

    ndu[0, 0] = 1.0
    for j in range(p):
        left[j] = x - knots[span - j]
        right[j] = knots[span + 1 + j] - x
        saved = 0.0
        for r in range(j + 1):
            ndu[j + 1, r] = right[r] + left[j - r]
            temp = ndu[r, j] / ndu[j + 1, r]
            ndu[r, j + 1] = saved + right[r] * temp
            saved = left[j - r] * temp
        ndu[j + 1, j + 1] = saved

    ders[0, :] = ndu[:, p]
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    r = float(p)
    for k in range(1, n_ders + 1):
        ders[k, :] *= r
        r *= p - k
    return ders


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KnotVector:
    """Nondecreasing knot sequence with its degree and distinct breakpoints."""

    degree: int
    knots: np.ndarray
    element_boundaries: np.ndarray = field(init=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if self.degree < 1:
            raise ValueError("KnotVector: degree must be >= 1")
        if np.any(np.diff(knots) < 0):
            raise ValueError("KnotVector: knots must be nondecreasing")
        uniq, counts = np.unique(knots, return_counts=True)
        if counts.max() > self.degree + 1:
            raise ValueError("KnotVector: knot multiplicity exceeds degree + 1")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "element_boundaries", uniq)


@dataclass(frozen=True)
class SplineSpace:
    """A univariate spline space on ``domain``, open or periodic.

    ``dim`` counts basis functions after periodic identification.  For the
    periodic case the underlying knot array extends ``degree`` elements past
    each end of the domain so that the standard evaluation kernels apply; the
    returned function indices are already reduced mod ``dim``.
    """

    degree: int
    n_elem: int
    domain: tuple[float, float]
    periodic: bool
    knot_vector: KnotVector
    dim: int

    # -- constructors are the module-level make_* functions --

    @property
    def breakpoints(self) -> np.ndarray:
        a, b = self.domain
        return np.linspace(a, b, self.n_elem + 1)

    @property
    def h(self) -> float:
        a, b = self.domain
        return (b - a) / self.n_elem

    def _check_theta(self, theta: float) -> float:
        a, b = self.domain
        if theta < a - 1e-12 or theta > b + 1e-12:
            raise ValueError(f"evaluation point {theta} outside domain [{a}, {b}]")
        return min(max(theta, a), b)

    def eval_basis(self, theta: float, max_deriv: int = 0, dtype=None):
        """Nonzero basis functions at ``theta``.

        Returns ``(indices, ders)`` where ``indices`` has length
        ``degree + 1`` (global function indices, reduced mod ``dim`` in the
        periodic case) and ``ders`` has shape ``(max_deriv + 1, degree + 1)``
        with values and theta-derivatives up to order ``max_deriv <= degree``.
        ``dtype`` switches the evaluation precision (e.g. ``np.longdouble``).
        """
        if max_deriv > self.degree:
            raise ValueError("max_deriv must not exceed the degree")
        theta = self._check_theta(theta)
        knots = self.knot_vector.knots
        if dtype is not None:
            knots = knots.astype(dtype)
            theta = dtype(theta)
        span = _find_span(knots, self.degree, theta)
        ders = _basis_ders(knots, self.degree, theta, span, max_deriv)
        first = span - self.degree
        idx = np.arange(first, first + self.degree + 1)
        if self.periodic:
            # knot array starts `degree` elements before the domain
            idx = (idx - self.degree) % self.dim
        return idx, ders

    def design_matrix(self, thetas: np.ndarray, deriv: int = 0,
                      dtype=None) -> np.ndarray:
        """Dense matrix ``A[i, j] = d^deriv N_j / d theta^deriv (thetas[i])``."""
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        out = np.zeros((thetas.size, self.dim), dtype=dtype or float)
        for i, t in enumerate(thetas):
            idx, ders = self.eval_basis(t, deriv, dtype=dtype)
            out[i, idx] += ders[deriv]
        return out

    def greville_abscissae(self) -> np.ndarray:
        """Knot averages, one per basis function, sorted into the domain."""
        p = self.degree
        knots = self.knot_vector.knots
        if not self.periodic:
            g = np.array([knots[i + 1 : i + p + 1].mean() for i in range(self.dim)])
            return g
        a, b = self.domain
        g = np.array([knots[i + 1 : i + p + 1].mean() for i in range(self.dim)])
        g = (g - a) % (b - a) + a
        return np.sort(g)

    def greville_collocation_matrix(self) -> np.ndarray:
        """Square interpolation matrix at the Greville abscissae."""
        return self.design_matrix(self.greville_abscissae())

    def evaluate(self, coeffs: np.ndarray, thetas: np.ndarray,
                 deriv: int = 0) -> np.ndarray:
        """Evaluate the spline with the given coefficient vector."""
        return self.design_matrix(thetas, deriv) @ np.asarray(coeffs, dtype=float)


def interpolate_at_greville(space: SplineSpace, values: np.ndarray) -> np.ndarray:
    """Coefficients of the spline interpolating ``values`` at the Greville points."""
    A = space.greville_collocation_matrix()
    return np.linalg.solve(A, np.asarray(values, dtype=float))


def prolongation_matrix(coarse: SplineSpace, fine: SplineSpace) -> np.ndarray:
    """Matrix P with fine = P @ coarse for nested spaces of equal degree.

    Computed by interpolating the coarse basis at the fine Greville points;
    exact (up to the collocation solve) when the coarse space is a subspace
    of the fine one, i.e. same degree and nested uniform meshes.
    """
    if coarse.degree != fine.degree or coarse.periodic != fine.periodic:
        raise ValueError("prolongation requires equal degree and periodicity")
    if fine.n_elem % coarse.n_elem != 0:
        raise ValueError("prolongation requires nested meshes")
    g = fine.greville_abscissae()
    V = coarse.design_matrix(g)
    A = fine.design_matrix(g)
    return np.linalg.solve(A, V)


def make_open_space(p: int, n_elem: int, domain: tuple[float, float]) -> SplineSpace:
    """Open uniform space on ``domain``: clamped ends, dimension n_elem + p."""
    if p < 1:
        raise ValueError("make_open_space: degree must be >= 1")
    if n_elem < 1:
        raise ValueError("make_open_space: need at least one element")
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise ValueError("make_open_space: empty domain")
    interior = np.linspace(a, b, n_elem + 1)
    knots = np.concatenate([np.full(p, a), interior, np.full(p, b)])
    kv = KnotVector(p, knots)
    return SplineSpace(degree=p, n_elem=n_elem, domain=(a, b), periodic=False,
                       knot_vector=kv, dim=n_elem + p)


def make_periodic_space(p: int, n_elem: int,
                        domain: tuple[float, float] = (0.0, 2.0 * np.pi)) -> SplineSpace:
    """Uniform periodic space: ``n_elem`` elements and exactly ``n_elem`` functions.

    Built from ``n_elem + p`` sequential uniform B-splines whose last ``p``
    are identified with the first ``p``; requires p >= 2 (C^1 continuity for
    the fourth-order bending term) and enough elements that no function wraps
    onto itself.
    """
    if p < 2:
        raise ValueError("make_periodic_space: degree must be >= 2")
    if n_elem < 2 * p + 1:
        raise ValueError(
            f"make_periodic_space: need n_elem >= {2 * p + 1} for degree {p}")
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise ValueError("make_periodic_space: empty domain")
    h = (b - a) / n_elem
    knots = a + h * np.arange(-p, n_elem + p + 1)
    kv = KnotVector(p, knots)
    return SplineSpace(degree=p, n_elem=n_elem, domain=(a, b), periodic=True,
                       knot_vector=kv, dim=n_elem)
