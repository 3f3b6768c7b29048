"""Functions on the lattice (hZ)^d and the discrete torus, and the operator.

The fractional discrete Laplacian is applied three ways: as a kernel sum on
the lattice (with exact step-profile tails in d=1 and certified truncation
in higher dimension), as a kernel sum on the torus through the periodized
kernel, and spectrally on the torus through its exact Fourier multiplier.
The pointwise and spectral torus routes are independent implementations
whose agreement is one of the package's core consistency checks, as is the
transference identity tying the lattice operator to the torus one.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from .kernel import (
    FracParams,
    ToleranceError,
    _kernel_1d_raw,
    _kernel_nd_impl,
    _tail_1d_raw,
    build_kernel_table,
    kernel_lattice_mass,
    kernel_tail_bound_ell1,
    torus_kernel_table,
)


# --- containers ---------------------------------------------------------------


@dataclass(frozen=True)
class StepProfile:
    """Two-sided step along one axis: left_value for j_axis <= -cutoff,
    right_value for j_axis >= cutoff, zero on the slab strictly in between.
    cutoff = 0 degenerates to the slab-free split (left for j_axis < 0,
    right for j_axis >= 0), so constants are representable."""

    axis: int
    cutoff: int
    left_value: float
    right_value: float

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")

    def base_value(self, j):
        c = int(np.atleast_1d(j)[self.axis])
        if c <= min(-self.cutoff, -1):
            return self.left_value
        if c >= self.cutoff:
            return self.right_value
        return 0.0


@dataclass(frozen=True)
class LatticeFunction:
    """Real function on Z^d: finite support plus an optional step profile.

    With profile=None this is a finitely supported function; otherwise the
    perturbation in ``support`` rides on top of the profile.  Both shapes
    are summable against (1+|m|)^{-d-2s}, so the operator is defined.
    """

    params: FracParams
    support: dict = field(default_factory=dict)
    profile: StepProfile | None = None

    def __post_init__(self):
        cleaned = {}
        for k, val in self.support.items():
            key = tuple(int(c) for c in np.atleast_1d(k))
            if len(key) != self.params.d:
                raise ValueError(f"support point {k} has wrong dimension")
            cleaned[key] = float(val)
        object.__setattr__(self, "support", cleaned)
        if self.profile is not None and not 0 <= self.profile.axis < self.params.d:
            raise ValueError("profile axis out of range")

    def value(self, j):
        key = tuple(int(c) for c in np.atleast_1d(j))
        v = self.support.get(key, 0.0)
        if self.profile is not None:
            v += self.profile.base_value(key)
        return v

    def sup_norm_bound(self):
        b = max((abs(v) for v in self.support.values()), default=0.0)
        if self.profile is not None:
            b += max(abs(self.profile.left_value), abs(self.profile.right_value))
        return b

    def to_json(self):
        prof = None
        if self.profile is not None:
            prof = {"axis": self.profile.axis, "cutoff": self.profile.cutoff,
                    "left": self.profile.left_value, "right": self.profile.right_value}
        return json.dumps({
            "d": self.params.d,
            "h": self.params.h,
            "s": self.params.s,
            "support": sorted([list(k) + [v] for k, v in self.support.items()]),
            "profile": prof,
        }, sort_keys=True)

    @staticmethod
    def from_json(text):
        obj = json.loads(text)
        params = FracParams(s=obj["s"], h=obj["h"], d=obj["d"])
        support = {tuple(int(c) for c in row[:-1]): row[-1] for row in obj["support"]}
        prof = obj.get("profile")
        profile = None
        if prof is not None:
            profile = StepProfile(prof["axis"], prof["cutoff"], prof["left"], prof["right"])
        return LatticeFunction(params, support, profile)


class TorusFunction:
    """Real array over the index cube {-N..N}^d with mesh h = 2pi/(2N+1)."""

    __slots__ = ("N", "d", "values")

    def __init__(self, N, d, values):
        self.N = int(N)
        self.d = int(d)
        arr = np.asarray(values, dtype=float)
        n = 2 * self.N + 1
        if arr.shape != (n,) * self.d:
            raise ValueError(f"values must have shape {(n,) * self.d}, got {arr.shape}")
        self.values = arr

    @property
    def h(self):
        return 2.0 * math.pi / (2 * self.N + 1)

    @property
    def n(self):
        return 2 * self.N + 1

    def value(self, j):
        # stored in {-N..N} order; any integer representative reduces mod n
        idx = tuple((int(c) + self.N) % self.n for c in np.atleast_1d(j))
        return self.values[idx]

    def copy_with(self, values):
        return TorusFunction(self.N, self.d, values)

    def to_json(self):
        return json.dumps({
            "d": self.d,
            "N": self.N,
            "h": self.h,
            "values": [float(x) for x in self.values.ravel(order="C")],
        }, sort_keys=True)

    @staticmethod
    def from_json(text):
        obj = json.loads(text)
        n = 2 * int(obj["N"]) + 1
        vals = np.array(obj["values"], dtype=float).reshape((n,) * int(obj["d"]))
        return TorusFunction(obj["N"], obj["d"], vals)


def torus_index(j, N):
    """Map a lattice index to array position on the {-N..N} grid (wrapping)."""
    n = 2 * N + 1
    return tuple(((int(c) + N) % n) for c in np.atleast_1d(j))


# --- DFT, symbol, Sobolev norms -----------------------------------------------


def dft(v):
    """Normalized DFT: u_hat_m = (2N+1)^{-d} sum_j u_j e^{-2 pi i m.j/(2N+1)},
    both indices running over {-N..N}^d."""
    axes = tuple(range(v.d))
    rolled = np.roll(v.values, -v.N, axis=axes)
    hat = np.fft.fftn(rolled) / v.n ** v.d
    return np.roll(hat, v.N, axis=axes)


def idft(coeffs, N, d):
    """Inverse of :func:`dft`; returns the complex value array in {-N..N} order."""
    n = 2 * N + 1
    axes = tuple(range(d))
    rolled = np.roll(coeffs, -N, axis=axes)
    vals = np.fft.ifftn(rolled) * n ** d
    return np.roll(vals, N, axis=axes)


def symbol(params, xi):
    """Fourier multiplier h^{-2s} (sum_k 4 sin^2(h xi_k / 2))^s; 2pi/h-periodic."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != params.d:
        raise ValueError("frequency dimension mismatch")
    q = np.sum(4.0 * np.sin(0.5 * params.h * xi) ** 2)
    return params.h ** (-2.0 * params.s) * q ** params.s


def _torus_multiplier(N, d, h, s):
    """The operator symbol on the torus frequency grid {-N..N}^d."""
    m = np.arange(-N, N + 1)
    sin2 = (4.0 / (h * h)) * np.sin(math.pi * m / (2 * N + 1)) ** 2
    acc = sin2
    for _ in range(d - 1):
        acc = acc[..., None] + sin2
    return acc ** s


def _sobolev_multiplier(N, d, h):
    """Base multiplier 1 + h^{-2} sum_k sin^2(h xi_k) on the frequency grid."""
    m = np.arange(-N, N + 1)
    sin2 = np.sin(2.0 * math.pi * m / (2 * N + 1)) ** 2 / (h * h)
    acc = sin2
    for _ in range(d - 1):
        acc = acc[..., None] + sin2
    return 1.0 + acc


def _sobolev_sq_grid(values, h, r):
    """Squared H^r norm of a value array regarded as one period of mesh-h data."""
    d = values.ndim
    n = values.shape[0]
    N = (n - 1) // 2
    axes = tuple(range(d))
    hat = np.fft.fftn(np.roll(values, -N, axis=axes)) / n ** d
    hat = np.roll(hat, N, axis=axes)
    mult = _sobolev_multiplier(N, d, h)
    return (h * n) ** d * float(np.sum(mult ** r * np.abs(hat) ** 2))


def sobolev_norm(u, r):
    """H^r norm through the lattice Fourier multiplier (1+h^{-2} sum sin^2)^{r/2}.

    Torus functions are evaluated exactly on their frequency grid.  Finitely
    supported lattice functions are embedded in a grid that doubles until
    the result is stable to 1e-12 relative (the integrand is analytic and
    periodic, so the embedded rectangle rule converges geometrically).
    """
    if isinstance(u, TorusFunction):
        return math.sqrt(_sobolev_sq_grid(u.values, u.h, r))
    if u.profile is not None:
        raise ValueError("sobolev_norm requires a finitely supported function")
    if not u.support:
        return 0.0
    d, h = u.params.d, u.params.h
    rad = max(max(abs(c) for c in k) for k in u.support)
    N = max(2 * rad + 2, 8)
    prev = None
    for _ in range(12):
        n = 2 * N + 1
        arr = np.zeros((n,) * d)
        for k, val in u.support.items():
            arr[tuple((c + N) % n for c in k)] += val
        cur = _sobolev_sq_grid(arr, h, r)
        if prev is not None and abs(cur - prev) <= 1e-12 * max(cur, 1e-300):
            return math.sqrt(cur)
        prev = cur
        N *= 2
    raise ToleranceError("sobolev_norm embedding did not stabilize")


# --- the operator on the lattice ----------------------------------------------


def _kernel_at(params, offset, tol):
    if params.d == 1:
        return _kernel_1d_raw(params.s, params.h, int(np.atleast_1d(offset)[0]))
    return _kernel_nd_impl(params.s, params.h,
                           [abs(int(c)) for c in np.atleast_1d(offset)], tol)[0]


def _sum_kernel_ge(params, M, j):
    """sum over m >= M, m != j of K(j-m) in closed form (d = 1)."""
    s, h = params.s, params.h
    if M > j:
        return _tail_1d_raw(s, h, float(M - j))
    return 2.0 * _tail_1d_raw(s, h, 1.0) - _tail_1d_raw(s, h, float(j - M + 1))


def _sum_kernel_le(params, M, j):
    if M < j:
        return _tail_1d_raw(params.s, params.h, float(j - M))
    return 2.0 * _tail_1d_raw(params.s, params.h, 1.0) - _tail_1d_raw(
        params.s, params.h, float(M - j + 1))


def apply_frac_lattice(u, j, tol=1e-10):
    """Pointwise operator value sum_{m != j} (u_j - u_m) K(j - m).

    Finitely supported inputs use the exact total kernel mass plus a finite
    sum; d=1 step profiles get exact half-line tails through the closed-form
    tail sums; d>=2 step profiles are truncated with an ell^1 tail
    certificate and raise ToleranceError if tol cannot be certified.
    """
    params = u.params
    jj = tuple(int(c) for c in np.atleast_1d(j))
    if len(jj) != params.d:
        raise ValueError("point dimension mismatch")
    uj = u.value(jj)
    ktol = 1e-12

    if u.profile is None:
        total = uj * kernel_lattice_mass(params) if uj != 0.0 else 0.0
        for m, um in u.support.items():
            if m == jj:
                continue
            off = tuple(a - b for a, b in zip(jj, m))
            total -= um * _kernel_at(params, off, ktol)
        return total

    if params.d == 1:
        jx = jj[0]
        prof = u.profile
        left_hi = min(-prof.cutoff, -1)
        right_lo = prof.cutoff
        total = uj * 2.0 * _tail_1d_raw(params.s, params.h, 1.0)
        total -= prof.left_value * _sum_kernel_le(params, left_hi, jx)
        total -= prof.right_value * _sum_kernel_ge(params, right_lo, jx)
        for m, um in u.support.items():
            if m == jj:
                continue
            total -= um * _kernel_1d_raw(params.s, params.h, jx - m[0])
        return total

    # d >= 2 step profile: centered-box truncation with a tail certificate
    sup = u.sup_norm_bound() + abs(uj)
    radius = 32
    while kernel_tail_bound_ell1(params, radius) * sup > tol:
        radius *= 2
        if radius > 4096:
            raise ToleranceError(
                "step-profile truncation certificate exceeds tol",
                achieved=kernel_tail_bound_ell1(params, radius // 2) * sup,
                requested=tol)
    table = build_kernel_table(params, radius, tol=min(1e-9, tol))
    total = 0.0
    for off in np.ndindex(*(2 * radius + 1,) * params.d):
        r = tuple(o - radius for o in off)
        if all(x == 0 for x in r):
            continue
        m = tuple(a - b for a, b in zip(jj, r))
        total += (uj - u.value(m)) * table.values[off]
    return total


# --- the operator on the torus --------------------------------------------------


@njit
def _apply_pointwise_1d(v, table):
    n = v.size
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for m in range(n):
            if m == j:
                continue
            acc += (v[j] - v[m]) * table[(j - m) % n]
        out[j] = acc
    return out


@njit
def _apply_pointwise_2d(v, table):
    n = v.shape[0]
    out = np.empty((n, n))
    for j1 in range(n):
        for j2 in range(n):
            acc = 0.0
            for m1 in range(n):
                for m2 in range(n):
                    if m1 == j1 and m2 == j2:
                        continue
                    acc += (v[j1, j2] - v[m1, m2]) * table[(j1 - m1) % n, (j2 - m2) % n]
            out[j1, j2] = acc
    return out


def apply_frac_torus_pointwise(v, s, tol=1e-11, method="auto"):
    """Torus operator through the periodized kernel sum (lattice route)."""
    vmax = float(np.abs(v.values).max())
    nterms = v.n ** v.d
    table_tol = min(1e-12, max(1e-15, 0.25 * tol / (nterms * (2.0 * vmax + 1.0))))
    table = torus_kernel_table(s, v.N, v.d, tol=table_tol, method=method)
    # table.full is indexed by offset mod n with the zero offset at slot 0
    if v.d == 1:
        out = _apply_pointwise_1d(v.values, table.full)
    elif v.d == 2:
        out = _apply_pointwise_2d(v.values, table.full)
    else:
        raise ValueError("pointwise torus application supports d <= 2")
    return v.copy_with(out)


def apply_frac_torus_spectral(v, s):
    """Torus operator through its exact Fourier multiplier (spectral route)."""
    lam = _torus_multiplier(v.N, v.d, v.h, s)
    out = idft(lam * dft(v), v.N, v.d)
    return v.copy_with(np.real(out))


# --- periodization, repetition, transference ------------------------------------


def periodize(u, N):
    """Wrap a finitely supported lattice function onto the {-N..N}^d torus."""
    if u.profile is not None:
        raise ValueError("periodize requires a finitely supported function")
    d = u.params.d
    n = 2 * N + 1
    arr = np.zeros((n,) * d)
    for k, val in u.support.items():
        arr[torus_index(k, N)] += val
    return TorusFunction(N, d, arr)


class RepeatedTorusFunction:
    """(2N+1)-periodic extension of a torus function to the whole lattice."""

    __slots__ = ("base",)

    def __init__(self, base):
        self.base = base

    def value(self, m):
        return float(self.base.values[torus_index(m, self.base.N)])

    __call__ = value


def repeat(v):
    """Evaluator of the periodic extension Rv on Z^d."""
    return RepeatedTorusFunction(v)


def _lattice_apply_callable(phi, ktol=1e-12):
    """Closure evaluating the operator of a finitely supported phi anywhere."""
    params = phi.params
    mass = kernel_lattice_mass(params)

    def op(l):
        ll = tuple(int(c) for c in np.atleast_1d(l))
        acc = phi.value(ll) * mass
        for m, pm in phi.support.items():
            if m == ll:
                continue
            off = tuple(a - b for a, b in zip(ll, m))
            acc -= pm * _kernel_at(params, off, ktol)
        return acc

    return op


@njit
def _transference_direct_1d(vrep, n, big_n, supp_pts, supp_vals, s, h, mass, L):
    # sum_{|l| <= L} Rv_l * (op phi)_l, kernels evaluated per offset
    nsup = supp_pts.size
    acc = 0.0
    for l in range(-L, L + 1):
        phi_l = 0.0
        for i in range(nsup):
            if supp_pts[i] == l:
                phi_l = supp_vals[i]
        op_l = phi_l * mass
        for i in range(nsup):
            off = l - supp_pts[i]
            if off != 0:
                op_l -= supp_vals[i] * _kernel_1d_raw(s, h, off)
        acc += vrep[((l + big_n) % n + n) % n] * op_l
    return acc


def transference_check(v, phi, tol=1e-10, method="wrapped", direct_radius=20000):
    """Defect of the lattice-to-torus transference identity.

    Left side: sum over Z^d of (periodic extension of v) times the lattice
    operator of phi.  Right side: torus inner product of v with the spectral
    operator applied to the periodization of phi.  method='wrapped' resums
    the absolutely convergent left side exactly through the periodized
    kernel; method='direct' (d=1 only) truncates the lattice sum at
    direct_radius and adds the measured-decay tail certificate to the
    returned defect.
    """
    if phi.profile is not None:
        raise ValueError("transference requires finitely supported phi")
    params = phi.params
    N, d = v.N, v.d
    n = v.n
    if d != params.d:
        raise ValueError("dimension mismatch")
    if abs(params.h - v.h) > 1e-12 * v.h:
        raise ValueError("transference requires the lattice mesh h = 2pi/(2N+1)")
    s = params.s

    pphi = periodize(phi, N)
    rhs_field = apply_frac_torus_spectral(pphi, s)
    rhs = float(np.sum(v.values * rhs_field.values))

    if method == "wrapped":
        mass = kernel_lattice_mass(params)
        table = torus_kernel_table(s, N, d, tol=1e-13, need_diag=True,
                                   method="series" if d == 1 else "heat")
        lhs = mass * float(np.sum(v.values * pphi.values))
        for m, pm in phi.support.items():
            for j in np.ndindex(*(n,) * d):
                jj = tuple(c - N for c in j)
                off = tuple(a - b for a, b in zip(jj, m))
                lhs -= float(v.values[j]) * pm * table.value(off)
        defect = abs(lhs - rhs)
        scale = max(abs(lhs), abs(rhs), 1e-30)
        if defect > tol * scale and defect > tol:
            raise ToleranceError("transference defect above tolerance",
                                 achieved=defect, requested=tol * scale)
        return defect

    if method != "direct" or d != 1:
        raise ValueError("method must be 'wrapped', or 'direct' with d = 1")
    mass = kernel_lattice_mass(params)
    op = _lattice_apply_callable(phi)
    supp_pts = np.array([k[0] for k in phi.support], dtype=np.int64)
    supp_vals = np.array([phi.support[(int(k),)] for k in supp_pts])
    L = int(direct_radius)
    lhs = _transference_direct_1d(v.values, n, N, supp_pts, supp_vals,
                                  s, params.h, mass, L)
    # measured decay constant of (op phi), inflated x4, integral-compared tail
    probe = [2 * L // 3, 3 * L // 4, L]
    cdec = 4.0 * max(abs(op(l)) * (1.0 + abs(l)) ** (1.0 + 2.0 * s) for l in probe)
    vmax = float(np.abs(v.values).max())
    tail = vmax * cdec * (L ** (-2.0 * s)) / s
    return abs(lhs - rhs) + tail
