"""Adiabatic spectrum of the self-consistent nonreciprocal two-level model.

Stationary states with biorthogonal normalization satisfy a closed quartic in
the level energy E:

    E^4 + c E^3 + (c^2 - gamma^2 - delta1*delta2)/4 E^2
        - (c*delta1*delta2/4) E - delta1*delta2*c^2/16 = 0

obtained by eliminating the self-consistent diagonal shift F through
F = gamma*E / (2E + c) together with E^2 = F^2 + delta1*delta2/4. All four
coefficients are real, so roots close under conjugation; real roots are
physical levels, complex ones signal decaying/growing pairs.

The solver is a Ferrari closed form with a guarded Newton polish; tests check
it against companion-matrix eigenvalues. Root-structure classification uses
the factored discriminant

    delta_disc = -c^2 gamma^2 (delta1 delta2) * xi,
    xi = (c^2 - gamma^2 - delta1 delta2)^3 - 27 c^2 gamma^2 delta1 delta2,

and the anti-phase parameter plane splits into three regions by the sign of
f(x, y) = (x^2 - y^2 + 1)^3 + 27 x^2 y^2 with x = c/delta, y = gamma/delta.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (BranchAmbiguityError, NoConvergenceError,
                     NonFiniteError, SelfConsistencySingularError)
from .model import ModelParams, drive_gamma

_PERMS4 = list(itertools.permutations(range(4)))

# Branch pairing: cost ties closer than this are ambiguous unless the tied
# assignments carry identical root values.
_TIE_TOL = 1e-12

_DEGENERACY_RADIUS = 1e-8     # multiplicity clustering radius
_SINGULAR_SHIFT_TOL = 1e-12   # |2E + c| below this: F undefined


class SpectrumClass(Enum):
    ALL_REAL = "all_real"
    TWO_REAL_ONE_CONJ_PAIR = "two_real_one_conj_pair"
    TWO_CONJ_PAIRS = "two_conj_pairs"
    DEGENERATE = "degenerate"


class Region(Enum):
    # anti-phase (c/delta, gamma/delta) plane, split by the separatrix
    # f(x, y) = (x^2 - y^2 + 1)^3 + 27 x^2 y^2 and the tangency lines y = +/-1
    REGION_I = 1     # f < 0: all four levels real (high-bias zone)
    REGION_II = 2    # f > 0, |y| > 1: two real levels plus a conjugate pair
    REGION_III = 3   # f > 0, |y| < 1: two real levels plus a conjugate pair,
                     # inside the low-bias strip where the pair never closes


@dataclass(frozen=True)
class QuarticCoeffs:
    """Monic quartic coefficients e4*E^4 + e3*E^3 + e2*E^2 + e1*E + e0."""

    e4: float
    e3: float
    e2: float
    e1: float
    e0: float

    def __post_init__(self):
        vals = (self.e4, self.e3, self.e2, self.e1, self.e0)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteError(f"non-finite quartic coefficients {vals}")
        if self.e4 != 1.0:
            raise ValueError("quartic must be monic (e4 == 1)")

    def as_array(self) -> np.ndarray:
        return np.array([self.e4, self.e3, self.e2, self.e1, self.e0])

    def __call__(self, x: complex) -> complex:
        return (((x + self.e3) * x + self.e2) * x + self.e1) * x + self.e0

    def derivative(self, x: complex) -> complex:
        return ((4.0 * x + 3.0 * self.e3) * x + 2.0 * self.e2) * x + self.e1


def quartic_coeffs(params: ModelParams, gamma: float) -> QuarticCoeffs:
    """Coefficients of the level quartic at bias value gamma."""
    c = params.c
    dd = params.delta1 * params.delta2
    return QuarticCoeffs(
        e4=1.0,
        e3=c,
        e2=0.25 * (c * c - gamma * gamma - dd),
        e1=-0.25 * c * dd,
        e0=-dd * c * c / 16.0,
    )


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _cubic_roots(b: float, c: float, d: float) -> list[complex]:
    """All roots of the real monic cubic x^3 + b x^2 + c x + d."""
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc >= 0.0:
        sq = math.sqrt(disc)
        u = _cbrt(-q / 2.0 + sq)
        v = _cbrt(-q / 2.0 - sq)
        re = -(u + v) / 2.0
        im = (u - v) * math.sqrt(3.0) / 2.0
        ys = [complex(u + v, 0.0), complex(re, im), complex(re, -im)]
    else:
        # three distinct real roots, trigonometric form
        r = math.sqrt(-(p / 3.0) ** 3)
        phi = math.acos(min(1.0, max(-1.0, -q / (2.0 * r))))
        m = 2.0 * math.sqrt(-p / 3.0)
        ys = [complex(m * math.cos((phi - 2.0 * math.pi * j) / 3.0), 0.0)
              for j in range(3)]
    return [y - b / 3.0 for y in ys]


def _stable_quadratic(b: float, c: float) -> tuple[complex, complex]:
    """Roots of x^2 + b x + c with real coefficients, cancellation safe."""
    disc = b * b - 4.0 * c
    if disc >= 0.0:
        sq = math.sqrt(disc)
        if b >= 0.0:
            r1 = (-b - sq) / 2.0
        else:
            r1 = (-b + sq) / 2.0
        r2 = c / r1 if r1 != 0.0 else -b - r1
        return complex(r1), complex(r2)
    sq = math.sqrt(-disc)
    return complex(-b / 2.0, sq / 2.0), complex(-b / 2.0, -sq / 2.0)


def _ferrari(q: QuarticCoeffs) -> list[complex]:
    b, c2, d, e = q.e3, q.e2, q.e1, q.e0
    # depressed quartic y^4 + p y^2 + qq y + r with x = y - b/4
    p = c2 - 3.0 * b * b / 8.0
    qq = d - b * c2 / 2.0 + b ** 3 / 8.0
    r = e - b * d / 4.0 + b * b * c2 / 16.0 - 3.0 * b ** 4 / 256.0
    scale = max(1.0, abs(p), abs(r)) ** 0.5
    if abs(qq) <= 1e-14 * max(1.0, scale ** 3):
        # biquadratic: exact for the undriven/uncoupled special cases
        s = cmath.sqrt(complex(p * p - 4.0 * r))
        ys = []
        for y2 in ((-p + s) / 2.0, (-p - s) / 2.0):
            root = cmath.sqrt(y2)
            ys.extend((root, -root))
    else:
        # resolvent cubic m^3 + p m^2 + (p^2 - 4r)/4 m - qq^2/8 = 0,
        # negative at m=0, so a real positive root always exists
        mroots = _cubic_roots(p, (p * p - 4.0 * r) / 4.0, -qq * qq / 8.0)
        m = max((z.real for z in mroots if abs(z.imag) <= 1e-9 * max(1.0, abs(z))),
                default=0.0)
        if m <= 0.0:
            m = max(1e-300, max(z.real for z in mroots))
        s = math.sqrt(2.0 * m)
        t = qq / (2.0 * s)
        ys = []
        y1, y2 = _stable_quadratic(-s, p / 2.0 + m + t)
        ys.extend((y1, y2))
        y3, y4 = _stable_quadratic(s, p / 2.0 + m - t)
        ys.extend((y3, y4))
    return [y - b / 4.0 for y in ys]


def _residual_ok(q: QuarticCoeffs, x: complex) -> bool:
    return abs(q(x)) <= 1e-12 * max(1.0, abs(x)) ** 4


def _newton(q: QuarticCoeffs, x: complex, iters: int = 12) -> complex:
    """Damped Newton; safe to call near multiple roots (keeps best iterate)."""
    fx = q(x)
    for _ in range(iters):
        if abs(fx) <= 1e-14 * max(1.0, abs(x)) ** 4:
            break
        dfx = q.derivative(x)
        if dfx == 0:
            break
        step = fx / dfx
        improved = False
        for damp in (1.0, 0.5, 0.25):
            trial = x - damp * step
            ftrial = q(trial)
            if abs(ftrial) < abs(fx):
                x, fx = trial, ftrial
                improved = True
                break
        if not improved:
            break
    return x


def _refine_close_pairs(q: QuarticCoeffs, roots: list[complex]) -> list[complex]:
    """Resolve nearly-coincident pairs through a local quadratic model.

    Near a double root plain Newton loses half the digits; expanding the
    quartic to second order about the pair midpoint recovers both members
    with error cubic in the gap, and also turns a real-seeded search complex
    when the pair actually sits off the axis.
    """
    scale = max(1.0, max(abs(z) for z in roots))
    out = list(roots)

    def sharp(x: complex) -> bool:
        return abs(q(x)) <= 1e-14 * max(1.0, abs(x)) ** 4

    for i in range(4):
        for j in range(i + 1, 4):
            if abs(out[i] - out[j]) > 1e-3 * scale:
                continue
            if sharp(out[i]) and sharp(out[j]):
                continue
            m = (out[i] + out[j]) / 2.0
            f, df = q(m), q.derivative(m)
            d2f = 12.0 * m * m + 6.0 * q.e3 * m + 2.0 * q.e2
            if d2f == 0:
                continue
            s = cmath.sqrt(df * df - 2.0 * f * d2f)
            out[i] = m + (-df + s) / d2f
            out[j] = m + (-df - s) / d2f
    return out


def _durand_kerner(q: QuarticCoeffs, seeds: list[complex]) -> list[complex]:
    """Simultaneous-iteration fallback for seeds the closed form misplaced."""
    scale = 1.0 + max(abs(q.e3), abs(q.e2), abs(q.e1), abs(q.e0))
    z = [s + (0.3 + 0.7j) * 1e-3 * scale * (idx + 1)
         for idx, s in enumerate(seeds)]
    for _ in range(200):
        moved = 0.0
        for i in range(4):
            denom = 1.0 + 0j
            for j in range(4):
                if j != i:
                    denom *= (z[i] - z[j])
            if denom == 0:
                z[i] += 1e-8 * scale * (1 + 1j)
                continue
            step = q(z[i]) / denom
            z[i] -= step
            moved = max(moved, abs(step))
        if moved < 1e-15 * scale:
            break
    return z


def _polish(q: QuarticCoeffs, roots: list[complex]) -> list[complex]:
    """Refine closed-form roots; falls back to simultaneous iteration.

    Raises NoConvergenceError if any residual stays above
    1e-12 * max(1, |E|)^4 after the fallback.
    """
    out = [_newton(q, x) for x in roots]
    out = _refine_close_pairs(q, out)
    out = [_newton(q, x, iters=4) for x in out]
    if not all(_residual_ok(q, x) for x in out):
        out = _durand_kerner(q, out)
        out = _refine_close_pairs(q, out)
        out = [_newton(q, x, iters=6) for x in out]
    for x in out:
        if not _residual_ok(q, x):
            raise NoConvergenceError(
                f"quartic refinement stalled at residual {abs(q(x)):.3e} for root {x}")
    return out


def _symmetrize_conjugates(roots: list[complex]) -> list[complex]:
    """Close the root multiset under conjugation (coefficients are real)."""
    scale = max(1.0, max(abs(z) for z in roots))
    flat = [complex(z.real, 0.0) if abs(z.imag) <= 1e-12 * scale else z
            for z in roots]
    pos = [i for i, z in enumerate(flat) if z.imag > 0]
    neg = [i for i, z in enumerate(flat) if z.imag < 0]
    used = set()
    for i in pos:
        if not neg:
            flat[i] = complex(flat[i].real, 0.0)
            continue
        j = min((j for j in neg if j not in used),
                key=lambda j: abs(flat[i] - flat[j].conjugate()),
                default=None)
        if j is None:
            flat[i] = complex(flat[i].real, 0.0)
            continue
        used.add(j)
        mean = (flat[i] + flat[j].conjugate()) / 2.0
        flat[i], flat[j] = mean, mean.conjugate()
    for j in neg:
        if j not in used:
            flat[j] = complex(flat[j].real, 0.0)
    return flat


def solve_quartic(coeffs: QuarticCoeffs) -> np.ndarray:
    """All four roots, conjugate closed, sorted by (real, imag).

    Residuals satisfy |q(E)| <= 1e-12 * max(1, |E|)^4 or NoConvergenceError
    is raised.
    """
    if coeffs.e0 == 0.0:
        # exact zero root(s): deflate instead of dragging them through
        # Ferrari, which would smear the double zero to ~sqrt(eps)
        if coeffs.e1 == 0.0:
            r1, r2 = _stable_quadratic(coeffs.e3, coeffs.e2)
            roots = [0j, 0j, r1, r2]
        else:
            roots = [0j] + _cubic_roots(coeffs.e3, coeffs.e2, coeffs.e1)
    else:
        roots = _ferrari(coeffs)
    roots = _polish(coeffs, roots)
    roots = _symmetrize_conjugates(roots)
    roots.sort(key=lambda z: (z.real, z.imag))
    return np.array(roots, dtype=complex)


def _multiplicities(roots: np.ndarray, radius: float = _DEGENERACY_RADIUS) -> tuple[int, ...]:
    """Cluster size for each root (shared radius, transitive closure)."""
    n = len(roots)
    labels = list(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) <= radius:
                lj, li = labels[j], labels[i]
                labels = [li if l == lj else l for l in labels]
    return tuple(labels.count(l) for l in labels)


@dataclass(frozen=True)
class SpectrumPoint:
    """Level structure at one bias value."""

    gamma: float
    roots: np.ndarray                  # 4 complex, branch ordered
    classification: SpectrumClass
    delta_disc: float                  # factored discriminant
    xi: float                          # cubic-in-disguise factor
    branch_ids: tuple[int, ...]
    spurious: tuple[bool, ...]         # True for the artifact zeros at c = 0
    multiplicities: tuple[int, ...]


def _classify_roots(params: ModelParams, gamma: float,
                    roots: np.ndarray) -> tuple[SpectrumClass, float, float]:
    c = params.c
    dd = params.delta1 * params.delta2
    g2 = gamma * gamma
    xi = (c * c - g2 - dd) ** 3 - 27.0 * c * c * g2 * dd
    delta_disc = -(c * c) * g2 * dd * xi
    if delta_disc == 0.0:
        return SpectrumClass.DEGENERATE, delta_disc, xi
    if delta_disc > 0.0:
        return SpectrumClass.TWO_REAL_ONE_CONJ_PAIR, delta_disc, xi
    p1 = c * c + 2.0 * (dd + g2)
    p2 = (dd + g2) * (2.0 * c * c + dd + g2)
    if p1 > 0.0 and p2 > 0.0:
        return SpectrumClass.ALL_REAL, delta_disc, xi
    return SpectrumClass.TWO_CONJ_PAIRS, delta_disc, xi


def _spurious_flags(params: ModelParams, roots: np.ndarray) -> tuple[bool, ...]:
    # At c = 0 the quartic factors as E^2 * (E^2 - (gamma^2 + d1 d2)/4):
    # two roots are identically zero regardless of gamma, an artifact of the
    # F-elimination rather than levels. Flag the two smallest in magnitude.
    if params.c != 0.0:
        return (False, False, False, False)
    order = np.argsort(np.abs(roots), kind="stable")
    flags = [False] * 4
    for i in order[:2]:
        flags[i] = True
    return tuple(flags)


def classify_point(params: ModelParams, gamma: float) -> SpectrumPoint:
    """Solve and classify the level quartic at one bias value."""
    q = quartic_coeffs(params, gamma)
    roots = solve_quartic(q)
    cls, delta_disc, xi = _classify_roots(params, gamma, roots)
    return SpectrumPoint(
        gamma=float(gamma),
        roots=roots,
        classification=cls,
        delta_disc=delta_disc,
        xi=xi,
        branch_ids=(0, 1, 2, 3),
        spurious=_spurious_flags(params, roots),
        multiplicities=_multiplicities(roots),
    )


def _conj_closed(values: list[complex], tol: float) -> bool:
    return all(min(abs(u - v.conjugate()) for u in values) <= tol for v in values)


def _match_branches(prev: np.ndarray, new: np.ndarray) -> tuple[int, ...]:
    """Assign new roots to branches by total-distance optimal pairing.

    Greedy nearest neighbour is checked against the exhaustive optimum over
    all 4! pairings. Cost ties within 1e-12 are inherent whenever a conjugate
    pair collapses onto the real axis (or is born from it): real roots are
    equidistant from both members of a conjugate pair. Such ties are resolved
    by a fixed canon (lowest permutation in lexicographic order), which keeps
    continuation through spectral transitions deterministic. A tie whose
    disputed roots do not carry that conjugate structure is a geometric
    accident that grid refinement removes, and raises BranchAmbiguityError.
    """
    scored = sorted((sum(abs(new[p[i]] - prev[i]) for i in range(4)), p)
                    for p in _PERMS4)
    best_cost, best = scored[0]
    scale = max(1.0, max(abs(z) for z in new))
    for cost, perm in scored[1:]:
        if cost - best_cost > _TIE_TOL:
            break
        disputed = [i for i in range(4)
                    if abs(new[perm[i]] - new[best[i]]) > _TIE_TOL]
        if not disputed:
            continue
        prev_set = [complex(prev[i]) for i in disputed]
        new_set = [complex(new[best[i]]) for i in disputed]
        if _conj_closed(prev_set, 1e-9 * scale) and _conj_closed(new_set, 1e-9 * scale):
            continue
        raise BranchAmbiguityError(
            "two root pairings tie within 1e-12 without conjugate-pair "
            "structure; refine the time grid")
    return best


@dataclass(frozen=True)
class SpectrumTrace:
    """Branch-continued spectrum along a time grid."""

    params: ModelParams
    times: np.ndarray
    gamma: np.ndarray
    roots: np.ndarray                  # (n, 4) complex, column = branch
    classifications: tuple[SpectrumClass, ...]
    spurious: np.ndarray               # (n, 4) bool


def spectrum_vs_time(params: ModelParams, tgrid) -> SpectrumTrace:
    """Quartic roots along gamma(t), continued into smooth branches.

    The first point is labelled in (real, imag) sort order; later points are
    matched to the previous ones by optimal assignment.
    """
    times = np.asarray(tgrid, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("tgrid must be a nonempty 1-d array")
    gammas = drive_gamma(times, params)
    roots = np.empty((len(times), 4), dtype=complex)
    classes = []
    spurious = np.zeros((len(times), 4), dtype=bool)
    prev = None
    for i, g in enumerate(gammas):
        point = classify_point(params, float(g))
        new = point.roots
        if prev is None:
            roots[i] = new
        else:
            perm = _match_branches(prev, new)
            roots[i] = new[list(perm)]
        flags = _spurious_flags(params, roots[i])
        spurious[i] = flags
        classes.append(point.classification)
        prev = roots[i]
    return SpectrumTrace(params=params, times=times, gamma=np.asarray(gammas),
                         roots=roots, classifications=tuple(classes),
                         spurious=spurious)


def region_classify(x: float, y: float) -> Region:
    """Region of the anti-phase parameter plane at x = c/delta, y = gamma/delta.

    The separatrix is f(x, y) = (x^2 - y^2 + 1)^3 + 27 x^2 y^2; its interior
    f < 0 is REGION_I. Outside, y^2 > 1 distinguishes REGION_II from
    REGION_III. Boundary ties resolve toward REGION_I and REGION_II.
    """
    f = (x * x - y * y + 1.0) ** 3 + 27.0 * x * x * y * y
    if abs(f) < 1e-12 or f < 0.0:
        return Region.REGION_I
    y2 = y * y
    if abs(y2 - 1.0) < 1e-12 or y2 > 1.0:
        return Region.REGION_II
    return Region.REGION_III


def region_map(xs, ys) -> np.ndarray:
    """Vectorized region ids (1, 2, 3) on the grid ys x xs."""
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
    f = (X * X - Y * Y + 1.0) ** 3 + 27.0 * X * X * Y * Y
    y2 = Y * Y
    out = np.full(X.shape, Region.REGION_III.value, dtype=np.int8)
    out[(np.abs(y2 - 1.0) < 1e-12) | (y2 > 1.0)] = Region.REGION_II.value
    out[(np.abs(f) < 1e-12) | (f < 0.0)] = Region.REGION_I.value
    return out


@dataclass(frozen=True)
class BiorthEigenpair:
    """Self-consistent stationary state for one quartic root."""

    energy: complex
    shift: complex                 # diagonal F = gamma E / (2E + c)
    right: np.ndarray              # (alpha1, beta1)
    left: np.ndarray               # (alpha2, beta2), <left|right> = 1


def eigenstate_for_root(energy: complex, params: ModelParams,
                        gamma: float) -> BiorthEigenpair:
    """Biorthogonal eigenpair for a quartic root.

    Right vector is proportional to (delta1/2, E - F), left to
    (delta2/2, conj(E - F)); normalization <left|right> = 1 uses the closed
    form <left|right> proportional to 2E(E - F). Spurious roots (2E + c = 0)
    and coalescing pairs have no normalizable eigenpair and raise
    SelfConsistencySingularError.
    """
    E = complex(energy)
    c = params.c
    denom = 2.0 * E + c
    if abs(denom) < _SINGULAR_SHIFT_TOL:
        raise SelfConsistencySingularError(
            f"diagonal shift undefined at 2E + c = {denom:.3e}")
    F = gamma * E / denom
    inner = 2.0 * E * (E - F)
    scale = max(1.0, abs(E)) ** 2
    if abs(inner) < _SINGULAR_SHIFT_TOL * scale:
        raise SelfConsistencySingularError(
            "left and right eigenvectors are orthogonal (coalescence)")
    s = cmath.sqrt(inner)
    right = np.array([0.5 * params.delta1, E - F], dtype=complex) / s
    left = np.array([0.5 * params.delta2, (E - F).conjugate()], dtype=complex) / s.conjugate()
    return BiorthEigenpair(energy=E, shift=F, right=right, left=left)


def eigenpair_residual(pair: BiorthEigenpair, params: ModelParams,
                       gamma: float) -> tuple[float, float]:
    """(right, left) eigen-equation residuals under the self-consistent H."""
    H = np.array([[pair.shift, 0.5 * params.delta1],
                  [0.5 * params.delta2, -pair.shift]], dtype=complex)
    res_r = np.linalg.norm(H @ pair.right - pair.energy * pair.right)
    res_l = np.linalg.norm(H.conj().T @ pair.left
                           - np.conj(pair.energy) * pair.left)
    return float(res_r), float(res_l)
