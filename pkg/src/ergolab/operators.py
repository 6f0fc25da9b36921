"""Concrete operator and dynamical-system models.

The Hilbert space of the paper-scale statements is realized as C^d and the
sample space is discretized (circle grid or finite atom space).  Koopman
operators of measure-preserving maps act by index remapping on the grid,
matrix operators act pointwise on the C^d values, Markov operators act across
the atoms of a finite space, and skew operators realize operator cocycles.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "SampleSpace",
    "Transformation",
    "VectorField",
    "LinearOperator",
    "Cocycle",
    "operator_norm",
    "cocycle_product",
    "skew_operator",
    "random_field",
    "bandlimited_random_field",
    "character_field",
    "operator_from_json",
]

_CONTRACTION_SLACK = 1e-12


class SampleSpace:
    """Probability space: Lebesgue on [0,1) via an equispaced grid of M
    points, a Monte Carlo point cloud, or a uniform finite space of m atoms."""

    def __init__(self, kind: str, size: int, mc: bool = False, seed: int | None = None):
        if kind not in ("circle", "finite"):
            raise ValueError(f"unknown sample space kind {kind!r}")
        self.kind = kind
        self.size = int(size)
        self.mc = bool(mc)
        self.seed = seed
        if kind == "circle":
            if size < 2:
                raise ValueError("circle grid needs M >= 2")
            if mc:
                rng = np.random.Generator(np.random.Philox(key=seed or 0))
                self.points = rng.random(size)
            else:
                self.points = np.arange(size) / size
        else:
            if size < 1:
                raise ValueError("finite space needs m >= 1")
            if mc:
                raise ValueError("finite spaces have no Monte Carlo mode")
            self.points = np.arange(size)
        self.weights = np.full(self.size, 1.0 / self.size)

    @classmethod
    def circle(cls, M: int) -> "SampleSpace":
        return cls("circle", M)

    @classmethod
    def circle_mc(cls, n_points: int, seed: int) -> "SampleSpace":
        return cls("circle", n_points, mc=True, seed=seed)

    @classmethod
    def finite(cls, m: int) -> "SampleSpace":
        return cls("finite", m)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        d["M" if self.kind == "circle" else "m"] = self.size
        if self.mc:
            d["mc"] = True
            d["seed"] = self.seed
        return d

    def __eq__(self, other):
        return (isinstance(other, SampleSpace) and self.kind == other.kind
                and self.size == other.size and self.mc == other.mc
                and self.seed == other.seed)

    def __hash__(self):
        return hash((self.kind, self.size, self.mc, self.seed))


class Transformation:
    """Measure-preserving map on a sample space.

    rotation(j, M): x -> x + j/M on the matching M-point grid (exact index
    shift).  Irrational rotations are only used through explicit orbits in
    Monte-Carlo mode, never through grid interpolation.
    doubling: x -> 2x mod 1 on a grid of M = 2^m points (exact index map,
    non-invertible).
    permutation(pi): atom i -> pi[i] on a finite space.
    """

    def __init__(self, kind: str, space: SampleSpace, *, shift: int | None = None,
                 pi=None, theta: float | None = None):
        self.kind = kind
        self.space = space
        self.shift = shift
        self.theta = theta
        self.pi = None if pi is None else np.asarray(pi, dtype=np.int64)
        if kind == "rotation":
            if space.kind != "circle":
                raise ValueError("rotation needs a circle space")
            if space.mc:
                if theta is None:
                    raise ValueError("Monte-Carlo rotation needs theta")
            else:
                if shift is None:
                    raise ValueError("grid rotation needs an integer shift j (theta = j/M)")
                self.theta = shift / space.size
        elif kind == "doubling":
            if space.kind != "circle" or space.mc:
                raise ValueError("doubling needs a circle grid")
            if space.size & (space.size - 1):
                raise ValueError("doubling grid size must be a power of two")
        elif kind == "permutation":
            if space.kind != "finite":
                raise ValueError("permutation needs a finite space")
            if sorted(self.pi.tolist()) != list(range(space.size)):
                raise ValueError("pi must be a permutation of 0..m-1")
        else:
            raise ValueError(f"unknown transformation kind {kind!r}")

    @classmethod
    def rotation(cls, space: SampleSpace, shift: int) -> "Transformation":
        return cls("rotation", space, shift=int(shift) % space.size)

    @classmethod
    def rotation_mc(cls, space: SampleSpace, theta: float) -> "Transformation":
        return cls("rotation", space, theta=float(theta))

    @classmethod
    def doubling(cls, space: SampleSpace) -> "Transformation":
        return cls("doubling", space)

    @classmethod
    def permutation(cls, space: SampleSpace, pi) -> "Transformation":
        return cls("permutation", space, pi=pi)

    def index_map(self, n: int = 1) -> np.ndarray:
        """Grid index map of the n-th iterate: x_i -> x_map[i]."""
        if n < 0:
            raise ValueError("iterate count must be nonnegative")
        M = self.space.size
        idx = np.arange(M, dtype=np.int64)
        if self.kind == "rotation":
            if self.space.mc:
                raise ValueError("Monte-Carlo rotation has no grid index map")
            return (idx + n * self.shift) % M
        if self.kind == "doubling":
            return (idx * pow(2, n, M)) % M
        # permutation: binary exponentiation on the map
        result = idx
        base = self.pi
        e = n
        while e:
            if e & 1:
                result = base[result]
            base = base[base]
            e >>= 1
        return result

    def orbit_points(self, x: float, steps) -> np.ndarray:
        """Exact orbit x + k*theta mod 1 (MC rotations), k over ``steps``."""
        if self.kind != "rotation":
            raise ValueError("orbit_points is for rotations")
        steps = np.asarray(steps, dtype=float)
        return np.mod(x + steps * self.theta, 1.0)

    def is_measure_preserving(self) -> bool:
        """Pushforward of the grid/atom weights equals the weights."""
        if self.kind == "doubling":
            # exact 2-to-1 on indices; preserves Lebesgue but not atom weights
            return False
        m = self.index_map(1)
        push = np.zeros(self.space.size)
        np.add.at(push, m, self.space.weights)
        return bool(np.allclose(push, self.space.weights, rtol=0, atol=0))


class VectorField:
    """Sampled C^d-valued function on a sample space, with L_p norms."""

    def __init__(self, space: SampleSpace, values):
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != space.size:
            raise ValueError(f"values have {values.shape[0]} rows, space has {space.size}")
        self.space = space
        self.values = values

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def pointwise_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def norm(self, p: float = 2.0) -> float:
        """(integral of |f(x)|_H^p dmu)^(1/p) on the discrete measure."""
        h = self.pointwise_norms()
        if math.isinf(p):
            return float(h.max(initial=0.0))
        return float(np.sum(self.space.weights * h**p) ** (1.0 / p))

    def copy(self) -> "VectorField":
        return VectorField(self.space, self.values.copy())

    def __add__(self, other):
        self._check(other)
        return VectorField(self.space, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return VectorField(self.space, self.values - other.values)

    def __mul__(self, c):
        return VectorField(self.space, self.values * c)

    __rmul__ = __mul__

    def _check(self, other):
        if other.space != self.space or other.values.shape != self.values.shape:
            raise ValueError("field mismatch (space or dimension)")

    @classmethod
    def zero(cls, space: SampleSpace, d: int) -> "VectorField":
        return cls(space, np.zeros((space.size, d), dtype=complex))


def character_field(space: SampleSpace, mode: int, vector=None) -> VectorField:
    """f(x) = e^{2 pi i * mode * x} v on a circle space."""
    if space.kind != "circle":
        raise ValueError("characters live on the circle")
    v = np.asarray([1.0] if vector is None else vector, dtype=complex)
    phase = np.exp(2j * np.pi * mode * space.points)
    return VectorField(space, phase[:, None] * v[None, :])


def random_field(space: SampleSpace, d: int, seed: int) -> VectorField:
    """Seeded complex Gaussian field (deterministic via Philox)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    vals = rng.standard_normal((space.size, d)) + 1j * rng.standard_normal((space.size, d))
    return VectorField(space, vals / math.sqrt(2.0))


def bandlimited_random_field(space: SampleSpace, d: int, seed: int) -> VectorField:
    """Random trig polynomial with modes in [0, M/2); stays alias-free under
    the doubling index map, where its Koopman action is an exact isometry."""
    if space.kind != "circle":
        raise ValueError("band-limited fields live on the circle")
    M = space.size
    rng = np.random.Generator(np.random.Philox(key=seed))
    n_modes = M // 2
    coef = rng.standard_normal((n_modes, d)) + 1j * rng.standard_normal((n_modes, d))
    phases = np.exp(2j * np.pi * np.outer(space.points, np.arange(n_modes)))
    return VectorField(space, phases @ coef / math.sqrt(2.0 * n_modes))


# ---------------------------------------------------------------------------
# spectral norm


def operator_norm(A, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Spectral norm via power iteration on A^H A, deterministic start."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError("matrix expected")
    B = A.conj().T @ A
    d = B.shape[0]
    if not np.any(B):
        return 0.0
    # deterministic, generically non-orthogonal start vector
    v = 1.0 + np.arange(d) / (2.0 * d) + 0.1j * np.cos(np.arange(d))
    v = v / np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(np.real(np.vdot(v, B @ v)))
        if abs(lam_new - lam) <= tol * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


# ---------------------------------------------------------------------------
# linear operators


class LinearOperator:
    """koopman / matrix / markov / skew operator with audited flags.

    Flags are finite audits, not proofs: ``contraction`` means spectral norm
    <= 1 + 1e-12 for matrix kinds and is analytic for koopman operators of
    measure-preserving maps; ``power_bound`` is checked over a finite horizon.
    """

    def __init__(self, kind: str, *, matrix=None, transformation: Transformation | None = None,
                 cocycle: "Cocycle | None" = None, power_bound: float | None = None,
                 audit_horizon: int = 64):
        self.kind = kind
        self.transformation = transformation
        self.cocycle = cocycle
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=complex)
        self._pow_cache = None
        self.dunford_schwartz = False
        self.power_bound = None

        if kind == "koopman":
            if transformation is None:
                raise ValueError("koopman operator needs a transformation")
            self.contraction = True  # composition with a measure-preserving map
        elif kind in ("matrix", "markov"):
            if self.matrix is None or self.matrix.ndim != 2 or \
                    self.matrix.shape[0] != self.matrix.shape[1]:
                raise ValueError("square matrix required")
            nrm = operator_norm(self.matrix)
            self.contraction = nrm <= 1.0 + _CONTRACTION_SLACK
            if kind == "markov":
                P = self.matrix
                rows = np.abs(P.sum(axis=1) - 1.0).max()
                cols = np.abs(P.sum(axis=0) - 1.0).max()
                nonneg = np.all(P.real >= -1e-15) and np.abs(P.imag).max(initial=0.0) < 1e-15
                self.dunford_schwartz = bool(nonneg and rows < 1e-12 and cols < 1e-12)
            if power_bound is not None:
                A = np.eye(self.matrix.shape[0], dtype=complex)
                worst = 0.0
                for _ in range(audit_horizon):
                    A = A @ self.matrix
                    worst = max(worst, operator_norm(A))
                if worst <= power_bound:
                    self.power_bound = float(power_bound)
                else:
                    raise ValueError(
                        f"power-bound audit failed: max norm {worst} > {power_bound}")
            elif self.contraction:
                self.power_bound = 1.0
        elif kind == "skew":
            if cocycle is None:
                raise ValueError("skew operator needs a cocycle")
            self.contraction = True  # re-verified numerically by skew_operator
        else:
            raise ValueError(f"unknown operator kind {kind!r}")

    # -- constructors --------------------------------------------------------

    @classmethod
    def koopman(cls, transformation: Transformation) -> "LinearOperator":
        return cls("koopman", transformation=transformation)

    @classmethod
    def from_matrix(cls, A, power_bound: float | None = None) -> "LinearOperator":
        return cls("matrix", matrix=A, power_bound=power_bound)

    @classmethod
    def markov(cls, P) -> "LinearOperator":
        return cls("markov", matrix=P)

    # -- action --------------------------------------------------------------

    def apply(self, f: VectorField) -> VectorField:
        if self.kind == "koopman":
            if f.space != self.transformation.space:
                raise ValueError("field lives on a different space")
            return VectorField(f.space, f.values[self.transformation.index_map(1)])
        if self.kind == "matrix":
            if f.dim != self.matrix.shape[0]:
                raise ValueError(f"field dimension {f.dim} != operator dimension "
                                 f"{self.matrix.shape[0]}")
            return VectorField(f.space, f.values @ self.matrix.T)
        if self.kind == "markov":
            if f.space.kind != "finite" or f.space.size != self.matrix.shape[0]:
                raise ValueError("markov operator needs a matching finite space")
            return VectorField(f.space, self.matrix @ f.values)
        # skew: (Tf)(w) = T_w f(alpha(w))
        c = self.cocycle
        if f.space != c.space:
            raise ValueError("field lives on a different space")
        pulled = f.values[c.base.index_map(1)]
        return VectorField(f.space, np.einsum("mij,mj->mi", c.fibers, pulled))

    def _matrix_power(self, n: int) -> np.ndarray:
        """Cached square-and-multiply; ladder products in fixed ascending order."""
        d = self.matrix.shape[0]
        if self._pow_cache is None:
            self._pow_cache = [self.matrix]
        while (1 << len(self._pow_cache)) <= n:
            last = self._pow_cache[-1]
            self._pow_cache.append(last @ last)
        out = np.eye(d, dtype=complex)
        bit = 0
        while (1 << bit) <= n:
            if n & (1 << bit):
                out = out @ self._pow_cache[bit]
            bit += 1
        return out

    def matrix_power(self, n: int) -> np.ndarray:
        if self.kind not in ("matrix", "markov"):
            raise ValueError("matrix powers only for matrix kinds")
        if n < 0:
            raise ValueError("power must be nonnegative")
        if n == 0:
            return np.eye(self.matrix.shape[0], dtype=complex)
        return self._matrix_power(n)

    def apply_power(self, n: int, f: VectorField) -> VectorField:
        if n < 0:
            raise ValueError("power must be nonnegative")
        if n == 0:
            return f.copy()
        if self.kind == "koopman":
            return VectorField(f.space, f.values[self.transformation.index_map(n)])
        if self.kind in ("matrix", "markov"):
            P = self.matrix_power(n)
            if self.kind == "matrix":
                return VectorField(f.space, f.values @ P.T)
            return VectorField(f.space, P @ f.values)
        out = f
        for _ in range(n):
            out = self.apply(out)
        return out


# ---------------------------------------------------------------------------
# cocycles


class Cocycle:
    """Family of fiber contractions driven by a base transformation.

    finite kind: one d x d contraction per atom.  circle kind: a matrix-valued
    step function on a partition of [0,1), materialized per grid point.
    """

    def __init__(self, base: Transformation, fibers):
        self.base = base
        self.space = base.space
        fibers = np.asarray(fibers, dtype=complex)
        if fibers.ndim != 3 or fibers.shape[0] != self.space.size or \
                fibers.shape[1] != fibers.shape[2]:
            raise ValueError("fibers must be (space.size, d, d)")
        for i in range(fibers.shape[0]):
            if operator_norm(fibers[i]) > 1.0 + _CONTRACTION_SLACK:
                raise ValueError(f"fiber {i} is not a contraction")
        self.fibers = fibers

    @property
    def dim(self) -> int:
        return self.fibers.shape[1]

    @classmethod
    def constant(cls, base: Transformation, T) -> "Cocycle":
        T = np.asarray(T, dtype=complex)
        return cls(base, np.broadcast_to(T, (base.space.size,) + T.shape).copy())

    @classmethod
    def from_step_function(cls, base: Transformation, breakpoints, matrices) -> "Cocycle":
        """Circle kind: fiber at x is matrices[j] for the partition cell
        [breakpoints[j], breakpoints[j+1]) containing x (breakpoints[0]=0)."""
        if base.space.kind != "circle":
            raise ValueError("step-function cocycles live on the circle")
        breakpoints = np.asarray(breakpoints, dtype=float)
        matrices = np.asarray(matrices, dtype=complex)
        cells = np.searchsorted(breakpoints, base.space.points, side="right") - 1
        return cls(base, matrices[cells])

    def fiber_at_index(self, i: int) -> np.ndarray:
        return self.fibers[i]


def cocycle_product(C: Cocycle, omega: int, n: int) -> np.ndarray:
    """Ordered product T_w T_{a(w)} ... T_{a^{n-1}(w)} at grid/atom index omega."""
    if n < 0:
        raise ValueError("power must be nonnegative")
    if not 0 <= omega < C.space.size:
        raise ValueError(f"point index {omega} outside the space")
    d = C.dim
    P = np.eye(d, dtype=complex)
    step = C.base.index_map(1)
    x = omega
    for _ in range(n):
        P = P @ C.fibers[x]
        x = int(step[x])
    return P


def skew_operator(C: Cocycle, audit_fields: int = 10, audit_seed: int = 7) -> LinearOperator:
    """The operator (Tf)(w) = T_w f(alpha(w)); contraction re-verified on
    random fields before the flag is trusted."""
    op = LinearOperator("skew", cocycle=C)
    for i in range(audit_fields):
        f = random_field(C.space, C.dim, seed=audit_seed + i)
        if op.apply(f).norm(2) > f.norm(2) * (1.0 + 1e-10):
            raise ArithmeticError("skew operator failed its contraction audit")
    return op


# ---------------------------------------------------------------------------
# JSON loading


def operator_from_json(desc: dict) -> LinearOperator:
    """Load {kind, theta|matrix|pi|fibers, space:{kind,m|M}, seed}."""
    kind = desc["kind"]
    sp = desc.get("space")
    space = None
    if sp is not None:
        if sp["kind"] == "circle":
            space = SampleSpace.circle(sp["M"])
        else:
            space = SampleSpace.finite(sp["m"])
    if kind == "matrix":
        return LinearOperator.from_matrix(_complex_matrix(desc["matrix"]))
    if kind == "markov":
        return LinearOperator.markov(_complex_matrix(desc["matrix"]))
    if kind == "koopman":
        if "pi" in desc:
            tr = Transformation.permutation(space, desc["pi"])
        elif desc.get("map") == "doubling":
            tr = Transformation.doubling(space)
        else:
            theta = desc["theta"]
            shift = round(theta * space.size)
            if not math.isclose(shift / space.size, theta, rel_tol=0, abs_tol=1e-12):
                raise ValueError("grid koopman rotations need theta = j/M")
            tr = Transformation.rotation(space, shift)
        return LinearOperator.koopman(tr)
    if kind == "skew":
        if "pi" in desc:
            base = Transformation.permutation(space, desc["pi"])
        else:
            base = Transformation.rotation(space, desc["shift"])
        fibers = np.asarray([_complex_matrix(f) for f in desc["fibers"]])
        return skew_operator(Cocycle(base, fibers))
    raise ValueError(f"unknown operator kind {kind!r}")


def _complex_matrix(entries) -> np.ndarray:
    arr = np.asarray(entries)
    if arr.ndim == 3 and arr.shape[-1] == 2:  # [[ [re, im], ... ]]
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)
