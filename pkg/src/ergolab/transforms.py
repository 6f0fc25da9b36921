"""Weighted averages, weighted series, modulated polynomials and the
one-sided ergodic Hilbert transforms built from them.

Everything here works with explicit truncations.  Suprema over the unit
circle are computed on oversampled grids with a local refinement and are
reported as certified lower bounds / heuristic values, never exact suprema.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import erfc

from .accum import kahan_cumsum
from .operators import LinearOperator, VectorField
from .weights import Schedule, WeightExpr, WeightSeq, asymptotic_class, twisted_weight

__all__ = [
    "ModulationSeq",
    "TransformTrace",
    "PartialSumStream",
    "weighted_average",
    "weighted_series",
    "modulated_poly",
    "sup_circle",
    "measure_K",
    "hilbert_partial",
    "phi_series",
    "twisted_bound_check",
    "interpolation_bound",
    "interpolation_bound_check",
    "opnorm_series",
    "sigma_of_t",
    "sigma_grid",
    "gamma_tail",
    "rearrangement_and_I",
    "I_majorant",
]

_CHUNK = 1 << 21  # complex entries per evaluation chunk


# ---------------------------------------------------------------------------
# modulation sequences


class ModulationSeq:
    """Bounded coefficient sequence {a_k}.

    kinds: constant c; rotation (a_k = lam^{n_k}, |lam| = 1); twist
    (a_k = k^{ir}); explicit list; fn (arbitrary callable over k, used for
    random streams); product of two modulations.
    """

    def __init__(self, kind: str, *, c=None, lam=None, r=None, values=None,
                 fn=None, bound=None, parts=None):
        self.kind = kind
        self.c = c
        self.r = r
        self.fn = fn
        self.parts = parts
        self._values = None if values is None else np.asarray(values, dtype=complex)
        if kind == "constant":
            self.sup_bound = abs(c)
        elif kind == "rotation":
            if abs(abs(lam) - 1.0) > 1e-12:
                raise ValueError("rotation modulation needs |lam| = 1")
            self.lam = lam / abs(lam)
            self.angle = math.atan2(self.lam.imag, self.lam.real)
            self.sup_bound = 1.0
        elif kind == "twist":
            self.sup_bound = 1.0
        elif kind == "explicit":
            self.sup_bound = float(np.abs(self._values).max(initial=0.0))
        elif kind == "fn":
            if bound is None:
                raise ValueError("fn modulation needs an explicit sup bound")
            self.sup_bound = float(bound)
        elif kind == "product":
            self.sup_bound = parts[0].sup_bound * parts[1].sup_bound
        else:
            raise ValueError(f"unknown modulation kind {kind!r}")

    @classmethod
    def constant(cls, c) -> "ModulationSeq":
        return cls("constant", c=complex(c))

    @classmethod
    def rotation(cls, lam) -> "ModulationSeq":
        return cls("rotation", lam=complex(lam))

    @classmethod
    def power_twist(cls, r: float) -> "ModulationSeq":
        return cls("twist", r=float(r))

    @classmethod
    def explicit(cls, values) -> "ModulationSeq":
        return cls("explicit", values=values)

    @classmethod
    def from_fn(cls, fn, bound: float) -> "ModulationSeq":
        return cls("fn", fn=fn, bound=bound)

    def compose(self, other: "ModulationSeq") -> "ModulationSeq":
        """Termwise product a_k * b_k."""
        return ModulationSeq("product", parts=(self, other))

    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.c == 0
        if self.kind == "product":
            return self.parts[0].is_zero() or self.parts[1].is_zero()
        return self.sup_bound == 0.0

    def values(self, ks, n_vals=None) -> np.ndarray:
        """a_k for the given k indices; rotation kinds need the n_k values."""
        ks = np.asarray(ks, dtype=np.int64)
        if self.kind == "constant":
            return np.full(ks.shape, self.c, dtype=complex)
        if self.kind == "rotation":
            if n_vals is None:
                raise ValueError("rotation modulation needs schedule values n_k")
            return np.exp(1j * self.angle * np.asarray(n_vals, dtype=float))
        if self.kind == "twist":
            return np.exp(1j * self.r * np.log(ks.astype(float)))
        if self.kind == "explicit":
            if ks.max(initial=0) > len(self._values):
                raise IndexError("explicit modulation is too short")
            return self._values[ks - 1]
        if self.kind == "fn":
            out = np.asarray(self.fn(ks), dtype=complex)
            if np.abs(out).max(initial=0.0) > self.sup_bound * (1.0 + 1e-12):
                raise ArithmeticError("modulation exceeded its declared bound")
            return out
        left = self.parts[0].values(ks, n_vals)
        right = self.parts[1].values(ks, n_vals)
        return left * right

    def describe(self) -> dict:
        d = {"kind": self.kind, "bound": self.sup_bound}
        if self.kind == "constant":
            d["c"] = [self.c.real, self.c.imag]
        elif self.kind == "rotation":
            d["lam"] = [self.lam.real, self.lam.imag]
        elif self.kind == "twist":
            d["r"] = self.r
        elif self.kind == "product":
            d["parts"] = [p.describe() for p in self.parts]
        return d


# ---------------------------------------------------------------------------
# traces


class TransformTrace:
    """Per-index records for a transform run.

    Rows are keyed by a strictly increasing index n.  When pointwise norms
    are supplied, the trace maintains the running pointwise maximum (the
    discrete maximal function) and records its L_p norm.
    """

    COLUMNS = ("n", "norm_Sn_over_Wn", "series_partial_norm",
               "running_max_Lp", "sup_circle")

    def __init__(self, space_weights=None, p: float = 2.0):
        self.space_weights = None if space_weights is None else np.asarray(space_weights)
        self.p = float(p)
        self.rows: list[dict] = []
        self._max = None

    def record(self, n: int, *, pointwise=None, norm_Sn_over_Wn=None,
               series_partial_norm=None, sup_circle=None) -> None:
        if self.rows and n <= self.rows[-1]["n"]:
            raise ValueError("trace indices must be strictly increasing")
        row = {"n": int(n)}
        if norm_Sn_over_Wn is not None:
            row["norm_Sn_over_Wn"] = float(norm_Sn_over_Wn)
        if series_partial_norm is not None:
            row["series_partial_norm"] = float(series_partial_norm)
        if pointwise is not None:
            pointwise = np.asarray(pointwise, dtype=float)
            if self._max is None:
                self._max = pointwise.copy()
            else:
                np.maximum(self._max, pointwise, out=self._max)
            row["running_max_Lp"] = self._lp(self._max)
        if sup_circle is not None:
            row["sup_circle"] = float(sup_circle)
        self.rows.append(row)

    def _lp(self, arr: np.ndarray) -> float:
        w = self.space_weights
        if w is None:
            w = np.full(arr.shape, 1.0 / arr.size)
        if math.isinf(self.p):
            return float(arr.max(initial=0.0))
        return float(np.sum(w * arr**self.p) ** (1.0 / self.p))

    def running_max(self):
        return None if self._max is None else self._max.copy()

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows if name in row]

    def to_csv(self, path) -> None:
        present = [c for c in self.COLUMNS
                   if c == "n" or any(c in row for row in self.rows)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(present)
            for row in self.rows:
                writer.writerow([_csv_cell(row.get(c)) for c in present])


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# weighted averages and series


class PartialSumStream:
    """Streams S_n = sum_{k=k_start}^{n} f_k, reusing the prefix across
    increasing n (each field is requested exactly once)."""

    def __init__(self, fseq, k_start: int = 1):
        self.fseq = fseq
        self.k_start = int(k_start)
        self.next_k = int(k_start)
        self.S = None

    def advance(self, n: int) -> VectorField:
        if self.S is not None and n < self.next_k - 1:
            raise ValueError("stream can only advance forward")
        while self.next_k <= n:
            f = self.fseq(self.next_k)
            if f is None:
                raise ValueError(f"field f_{self.next_k} is undefined")
            self.S = f.copy() if self.S is None else self.S + f
            self.next_k += 1
        if self.S is None:
            raise ValueError(f"empty sum: n={n} is below k_start={self.k_start}")
        return self.S


def weighted_average(fseq, W: WeightSeq, n: int, stream: PartialSumStream | None = None,
                     k_start: int | None = None) -> VectorField:
    """(1/W_n) sum_{k<=n} f_k; pass a stream to reuse prefix sums across n."""
    if k_start is None:
        k_start = stream.k_start if stream is not None else 1
    if n < max(k_start, W.n0):
        raise ValueError(f"n={n} is below the start index")
    if stream is None:
        stream = PartialSumStream(fseq, k_start)
    S = stream.advance(n)
    return S * (1.0 / W.eval(n))


def weighted_series(fseq, W: WeightSeq, n: int, k_start: int | None = None):
    """Partial sum sum_{k<=n} f_k/W_k computed two ways.

    Returns (direct, abel) where the Abel form is
    S_n/W_n + sum_{k<n} (1/W_k - 1/W_{k+1}) S_k; the two agree algebraically.
    """
    if k_start is None:
        k_start = W.n0
    if n < max(k_start, W.n0):
        raise ValueError(f"n={n} is below the start index")
    w = W.prefix(n + 1)[k_start - W.n0:]
    S = None
    direct = None
    correction = None
    for k in range(k_start, n + 1):
        f = fseq(k)
        if f is None:
            raise ValueError(f"field f_{k} is undefined")
        S = f.copy() if S is None else S + f
        i = k - k_start
        term = f * (1.0 / w[i])
        direct = term if direct is None else direct + term
        if k < n:
            coeff = 1.0 / w[i] - 1.0 / w[i + 1]
            piece = S * coeff
            correction = piece if correction is None else correction + piece
    abel = S * (1.0 / w[n - k_start])
    if correction is not None:
        abel = abel + correction
    return direct, abel


# ---------------------------------------------------------------------------
# modulated polynomials on the circle


def _schedule_floats(sched: Schedule, n: int) -> np.ndarray:
    return sched.values(n).astype(float)


def modulated_poly(a: ModulationSeq, sched: Schedule, n: int, lam: complex,
                   k_start: int = 1) -> complex:
    """psi_n(lam) = sum_{k<=n} a_k lam^{n_k}, compensated real/imag sums."""
    if a.is_zero() or n < k_start:
        return 0j
    ks = np.arange(k_start, n + 1, dtype=np.int64)
    n_vals = _schedule_floats(sched, n)[k_start - 1:]
    ang = math.atan2(complex(lam).imag, complex(lam).real)
    terms = a.values(ks, n_vals) * np.exp(1j * ang * n_vals)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def _psi_on_grid(a: ModulationSeq, sched: Schedule, n: int, angles: np.ndarray,
                 k_start: int = 1, cumulative_cols=None) -> np.ndarray:
    """|psi_n| at each grid angle; with ``cumulative_cols`` (sorted indices m)
    returns the matrix |psi_m| of shape (len(angles), len(cols)) instead."""
    ks = np.arange(k_start, n + 1, dtype=np.int64)
    n_vals = _schedule_floats(sched, n)[k_start - 1:]
    coefs = a.values(ks, n_vals)
    nterms = len(ks)
    rows = max(1, _CHUNK // max(nterms, 1))
    out = []
    for lo in range(0, len(angles), rows):
        chunk = angles[lo:lo + rows]
        phases = np.exp(1j * np.outer(chunk, n_vals))
        if cumulative_cols is None:
            out.append(np.abs(phases @ coefs))
        else:
            partial = np.cumsum(phases * coefs[None, :], axis=1)
            out.append(np.abs(partial[:, np.asarray(cumulative_cols) - k_start]))
    return np.concatenate(out, axis=0)


@dataclass
class SupCircleResult:
    lower_bound: float          # certified: an attained value of |psi_n|
    value: float                # heuristic sup after local refinement
    lam: complex
    grid_size: int
    n: int


def sup_circle(a: ModulationSeq, sched: Schedule, n: int, M_grid: int | None = None,
               allow_coarse: bool = False, k_start: int = 1) -> SupCircleResult:
    """Grid maximum of |psi_n| over |lam| = 1 with one local refinement.

    The oversampling rule M_grid >= 4 * n_n keeps the grid-miss error of the
    degree-n_n polynomial modulus well below test tolerances.
    """
    n_n = sched.value(n)
    required = 4 * n_n
    if M_grid is None:
        M_grid = max(required, 8)
    if M_grid < required and not allow_coarse:
        raise ValueError(
            f"grid of {M_grid} points is too coarse for degree {n_n} "
            f"(need >= {required}); pass allow_coarse to override")
    if a.is_zero():
        return SupCircleResult(0.0, 0.0, 1 + 0j, M_grid, n)
    angles = 2.0 * np.pi * np.arange(M_grid) / M_grid
    mags = _psi_on_grid(a, sched, n, angles, k_start)
    j = int(np.argmax(mags))
    grid_max = float(mags[j])

    def neg(theta):
        return -abs(modulated_poly(a, sched, n, np.exp(1j * theta), k_start))

    h = 2.0 * np.pi / M_grid
    res = minimize_scalar(neg, bounds=(angles[j] - h, angles[j] + h),
                          method="bounded", options={"xatol": 1e-12})
    refined = max(grid_max, float(-res.fun))
    theta = float(res.x) if -res.fun >= grid_max else float(angles[j])
    return SupCircleResult(refined, refined, complex(np.exp(1j * theta)), M_grid, n)


@dataclass
class KMeasurement:
    K: float
    n_at_max: int
    lam: complex
    grid_size: int
    n_max: int


def measure_K(a: ModulationSeq, sched: Schedule, G: WeightSeq, n_max: int,
              M_grid: int | None = None, allow_coarse: bool = False,
              k_start: int | None = None) -> KMeasurement:
    """Measured sup over n <= n_max and the lambda grid of |psi_n|/G_n.

    The sup runs over every n (not just a ladder) so downstream Abel-type
    bounds can rely on |psi_k| <= K G_k for all k.
    """
    if k_start is None:
        k_start = G.n0
    n_top = sched.value(n_max)
    required = 4 * n_top
    if M_grid is None:
        M_grid = max(required, 8)
    if M_grid < required and not allow_coarse:
        raise ValueError(
            f"grid of {M_grid} points is too coarse for degree {n_top} "
            f"(need >= {required}); pass allow_coarse to override")
    g = G.prefix(n_max)[k_start - G.n0:]
    if a.is_zero():
        return KMeasurement(0.0, k_start, 1 + 0j, M_grid, n_max)
    angles = 2.0 * np.pi * np.arange(M_grid) / M_grid
    cols = np.arange(k_start, n_max + 1)
    mags = _psi_on_grid(a, sched, n_max, angles, k_start, cumulative_cols=cols)
    ratios = mags / g[None, :]
    flat = int(np.argmax(ratios))
    ji, ni = divmod(flat, ratios.shape[1])
    n_star = int(cols[ni])
    K_grid = float(ratios[ji, ni])

    def neg(theta):
        return -abs(modulated_poly(a, sched, n_star, np.exp(1j * theta), k_start))

    h = 2.0 * np.pi / M_grid
    res = minimize_scalar(neg, bounds=(angles[ji] - h, angles[ji] + h),
                          method="bounded", options={"xatol": 1e-12})
    K = max(K_grid, float(-res.fun) / g[ni])
    theta = float(res.x) if -res.fun / g[ni] >= K_grid else float(angles[ji])
    return KMeasurement(K, n_star, complex(np.exp(1j * theta)), M_grid, n_max)


# ---------------------------------------------------------------------------
# one-sided ergodic Hilbert transforms


def _require_bounded(T: LinearOperator):
    if not (T.contraction or T.power_bound is not None):
        raise ValueError("operator must carry a contraction or power-bounded flag")


def hilbert_partial(a: ModulationSeq, T: LinearOperator, sched: Schedule,
                    W: WeightSeq, f: VectorField, n: int,
                    trace: TransformTrace | None = None,
                    k_start: int | None = None) -> VectorField:
    """sum_{k<=n} a_k T^{n_k} f / W_k."""
    return phi_series(a, T, sched, W, beta=0.0, t=0.0, f=f, n=n,
                      trace=trace, k_start=k_start)


def phi_series(a: ModulationSeq, T: LinearOperator, sched: Schedule, W: WeightSeq,
               beta: float, t: float, f: VectorField, n: int,
               trace: TransformTrace | None = None,
               k_start: int | None = None) -> VectorField:
    """sum_{k<=n} a_k T^{n_k} f / (k^{beta t} W_k); t = 0 is the undamped
    transform (hilbert_partial runs through this same code path)."""
    _require_bounded(T)
    if not 0.0 <= t <= 1.0:
        raise ValueError("interpolation parameter t must lie in [0, 1]")
    if k_start is None:
        k_start = W.n0
    if n < k_start:
        raise ValueError(f"n={n} is below the start index {k_start}")
    out = VectorField.zero(f.space, f.dim)
    if a.is_zero():
        return out
    ks = np.arange(k_start, n + 1, dtype=np.int64)
    w = W.prefix(n)[k_start - W.n0:]
    n_floats = _schedule_floats(sched, n)[k_start - 1:]
    coeffs = a.values(ks, n_floats) / w
    if t != 0.0:
        coeffs = coeffs / ks.astype(float) ** (beta * t)

    prev_nk = 0
    g = f
    for i, k in enumerate(range(k_start, n + 1)):
        n_k = sched.value(k)
        if T.kind in ("koopman", "matrix", "markov"):
            g = T.apply_power(n_k, f)
        else:
            g = T.apply_power(n_k - prev_nk, g)
        prev_nk = n_k
        out = out + g * coeffs[i]
        if trace is not None:
            norms = out.pointwise_norms()
            trace.record(k, pointwise=norms, series_partial_norm=out.norm(trace.p))
    return out


# ---------------------------------------------------------------------------
# bound checks


@dataclass
class BoundReport:
    kind: str
    max_ratio: float
    worst: dict
    entries: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"kind": self.kind, "max_ratio": self.max_ratio,
                "worst": self.worst, "entries": self.entries}


def twisted_bound_check(a: ModulationSeq, sched: Schedule, G: WeightSeq, K: float,
                        rs, n_ladder, n_lambda: int = 256) -> BoundReport:
    """max_lam |sum_{k<=n} a_k k^{ir} lam^{n_k}|  vs  |r| K G_{n,r}."""
    k_start = G.n0
    n_max = max(n_ladder)
    angles = 2.0 * np.pi * np.arange(n_lambda) / n_lambda
    cols = np.asarray(sorted(n_ladder))
    entries = []
    max_ratio = 0.0
    worst = {}
    for r in rs:
        twisted = a.compose(ModulationSeq.power_twist(r))
        mags = _psi_on_grid(twisted, sched, n_max, angles, k_start,
                            cumulative_cols=cols)
        lhs = mags.max(axis=0)
        per_r = 0.0
        for ci, nn in enumerate(cols):
            rhs = abs(r) * K * twisted_weight(G, r, int(nn))
            ratio = float(lhs[ci] / rhs) if rhs > 0 else math.inf
            entries.append({"r": r, "n": int(nn), "lhs": float(lhs[ci]),
                            "rhs": rhs, "ratio": ratio})
            per_r = max(per_r, ratio)
            if ratio > max_ratio:
                max_ratio = ratio
                worst = {"r": r, "n": int(nn), "ratio": ratio}
        entries.append({"r": r, "max_ratio": per_r})
    return BoundReport("twisted-T41", max_ratio, worst, entries)


def interpolation_bound(n: int, a_bound: float, K: float, G_n: float, p: float) -> float:
    """(n a_bound)^{(2-p)/p} (K G_n)^{2(p-1)/p}, with exact endpoint forms."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    if p == 2.0:
        return K * G_n
    if p == 1.0:
        return n * a_bound
    t = (2.0 - p) / p
    return (n * a_bound) ** t * (K * G_n) ** (1.0 - t)


def interpolation_bound_check(a: ModulationSeq, T: LinearOperator, sched: Schedule,
                              G: WeightSeq, K: float, p: float, fields,
                              n_ladder, k_start: int | None = None) -> BoundReport:
    """||sum_{k<=n} a_k T^{n_k} f||_p <= bound(n) ||f||_p for each field."""
    if not T.dunford_schwartz:
        raise ValueError("interpolation bound needs a Dunford-Schwartz operator")
    if k_start is None:
        k_start = G.n0
    ladder = sorted(n_ladder)
    n_max = ladder[-1]
    ks = np.arange(k_start, n_max + 1, dtype=np.int64)
    n_floats = _schedule_floats(sched, n_max)[k_start - 1:]
    coefs = a.values(ks, n_floats)
    g_vals = G.prefix(n_max)[k_start - G.n0:]
    entries = []
    max_ratio = 0.0
    worst = {}
    for fi, f in enumerate(fields):
        fnorm = f.norm(p)
        partial = VectorField.zero(f.space, f.dim)
        li = 0
        for i, k in enumerate(range(k_start, n_max + 1)):
            partial = partial + T.apply_power(sched.value(k), f) * coefs[i]
            if li < len(ladder) and k == ladder[li]:
                bound = interpolation_bound(k, a.sup_bound, K,
                                            float(g_vals[i]), p) * fnorm
                lhs = partial.norm(p)
                ratio = lhs / bound if bound > 0 else (0.0 if lhs == 0 else math.inf)
                entries.append({"field": fi, "n": k, "lhs": lhs,
                                "bound": bound, "ratio": ratio})
                if ratio > max_ratio:
                    max_ratio = ratio
                    worst = {"field": fi, "n": k, "ratio": ratio}
                li += 1
    return BoundReport("interpolation-T44", max_ratio, worst, entries)


@dataclass
class OpNormReport:
    gaps: list                   # [(j, n, gap, bound), ...] consecutive pairs
    all_pairs_ok: bool
    gaps_monotone: bool
    K_check_max: float           # max over ladder of ||S_n(A)|| / (K G_n)
    entries: list = field(default_factory=list, repr=False)


def opnorm_series(a: ModulationSeq, A: LinearOperator, sched: Schedule,
                  W: WeightSeq, n_ladder, K: float, G: WeightSeq,
                  tail_N: int = 10**6, k_start: int | None = None) -> OpNormReport:
    """Operator-norm partial sums of sum a_k A^{n_k}/W_k with the tail bound

        gap(j, n) <= tail(j) + ||S_j(A)/W_j|| + ||S_n(A)/W_n||,
        tail(j) = K sum_{k>=j} (G_k/W_k)(1 - W_k/W_{k+1}).
    """
    from .operators import operator_norm

    if A.kind not in ("matrix", "markov"):
        raise ValueError("operator-norm series needs a matrix operator")
    _require_bounded(A)
    if k_start is None:
        k_start = max(W.n0, G.n0)
    ladder = sorted(n_ladder)
    n_max = ladder[-1]

    ks = np.arange(k_start, n_max + 1, dtype=np.int64)
    n_floats = _schedule_floats(sched, n_max)[k_start - 1:]
    coefs = a.values(ks, n_floats)
    w = W.prefix(n_max)[k_start - W.n0:]
    g = G.prefix(n_max)[k_start - G.n0:]

    d = A.matrix.shape[0]
    S = np.zeros((d, d), dtype=complex)          # unweighted sum a_k A^{n_k}
    Sw = np.zeros((d, d), dtype=complex)         # weighted sum a_k A^{n_k}/W_k
    snapshots = {}
    li = 0
    for i, k in enumerate(range(k_start, n_max + 1)):
        P = A.matrix_power(sched.value(k))
        S = S + coefs[i] * P
        Sw = Sw + (coefs[i] / w[i]) * P
        if li < len(ladder) and k == ladder[li]:
            snapshots[k] = (operator_norm(S) / w[i], Sw.copy())
            li += 1

    # tail(j): numeric suffix to tail_N plus the symbolic class remainder
    tail_top = max(tail_N, n_max)
    gt = G.prefix(tail_top + 1)[k_start - G.n0:]
    wt = W.prefix(tail_top + 1)[k_start - W.n0:]
    terms = (gt[:-1] / wt[:-1]) * (1.0 - wt[:-1] / wt[1:])
    csums = kahan_cumsum(terms)
    total = csums[-1]
    remainder = 0.0
    if G.expr is not None and W.expr is not None:
        from .admissibility import log_derivative_shift, _tail_estimate
        shift = log_derivative_shift(W.expr)
        if shift is not None:
            est = _tail_estimate((G.expr / W.expr) * shift, tail_top)
            if est is not None:
                remainder = est

    def tail(j: int) -> float:
        i = j - k_start
        head = csums[i - 1] if i > 0 else 0.0
        return K * (total - head + remainder)

    entries = []
    all_ok = True
    k_check = 0.0
    for j in ladder:
        nrm, _sw = snapshots[j]
        k_check = max(k_check, nrm * w[j - k_start] / (K * g[j - k_start]))
    for ai in range(len(ladder)):
        for bi in range(ai + 1, len(ladder)):
            j, nn = ladder[ai], ladder[bi]
            gap = operator_norm(snapshots[nn][1] - snapshots[j][1])
            bound = tail(j) + snapshots[j][0] + snapshots[nn][0]
            ok = gap <= bound * (1.0 + 1e-12)
            all_ok = all_ok and ok
            entries.append({"j": j, "n": nn, "gap": float(gap),
                            "bound": float(bound), "ok": ok})
    adjacent = set(zip(ladder, ladder[1:]))
    consecutive = [(e["j"], e["n"], e["gap"], e["bound"]) for e in entries
                   if (e["j"], e["n"]) in adjacent]
    gaps_mono = all(a2[2] <= a1[2] for a1, a2 in zip(consecutive, consecutive[1:]))
    return OpNormReport(consecutive, all_ok, gaps_mono, k_check, entries)


# ---------------------------------------------------------------------------
# the sigma machinery


def gamma_tail(G: WeightSeq, sched: Schedule, alpha: float, N: int) -> float:
    """Upper estimate for sum_{k>N} n_k^alpha / G_k^2 (needs symbolic class)."""
    if G.expr is None:
        raise ValueError("tail estimate needs a symbolic weight")
    composed = asymptotic_class(WeightExpr(n_exp=alpha), sched)
    if composed is None:
        raise ValueError("tail estimate needs a symbolic schedule")
    cls = composed * G.expr**-2.0
    from .admissibility import bertrand_converges
    if not bertrand_converges(cls):
        raise ValueError("gamma series diverges; no tail estimate")
    if cls.superexp_coeff < 0.0:
        return 2.0 * float(cls(float(N + 1)))
    # substitute x = N/u; quad mishandles slow tails on the infinite interval
    val, _err = quad(lambda u: cls(float(N) / u) * float(N) / u**2,
                     0.0, 1.0, limit=200)
    return float(val) + float(cls(float(N + 1)))


def sigma_of_t(G: WeightSeq, sched: Schedule, t: float, N: int, alpha: float,
               tail: float | None = None):
    lo, hi = sigma_grid(G, sched, np.asarray([t]), N, alpha, tail)
    return float(lo[0]), float(hi[0])


def sigma_grid(G: WeightSeq, sched: Schedule, ts, N: int, alpha: float,
               tail: float | None = None):
    """sigma(t) = 2 (sum_k sin^2(n_k t/2)/G_k^2)^{1/2}, truncated at N.

    Returns (lower, upper): the bare truncation and the truncation plus the
    tail majorized through sin^2 x <= |x|^alpha, which keeps the upper
    estimate 0 at t = 0 and below the |t|^{alpha/2} envelope everywhere.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    ts = np.asarray(ts, dtype=float)
    if tail is None:
        tail = gamma_tail(G, sched, alpha, N)
    k_start = G.n0
    g2 = G.prefix(N)[0:] ** 2
    n_half = _schedule_floats(sched, N)[k_start - 1:] / 2.0
    inv_g2 = 1.0 / g2
    rows = max(1, _CHUNK // max(len(n_half), 1))
    partial = np.empty(ts.shape)
    for lo_i in range(0, len(ts), rows):
        chunk = ts[lo_i:lo_i + rows]
        s2 = np.sin(np.outer(chunk, n_half)) ** 2
        partial[lo_i:lo_i + rows] = s2 @ inv_g2
    lower = 2.0 * np.sqrt(partial)
    upper = 2.0 * np.sqrt(partial + (np.abs(ts) / 2.0) ** alpha * tail)
    return lower, upper


@dataclass
class RearrangementResult:
    sigma_bar: np.ndarray        # nondecreasing rearrangement (sorted samples)
    I: float
    diverged: bool
    u_min: float
    u_max: float

    def distribution(self, u: float) -> float:
        """m_sigma(u): measure of {t in [0, 2pi] : sigma(t) < u}."""
        count = int(np.searchsorted(self.sigma_bar, u, side="left"))
        return 2.0 * np.pi * count / len(self.sigma_bar)


def rearrangement_and_I(sigma_samples, min_samples: int = 1 << 14,
                        du: float = 1e-3, u_cap: float = 8.0) -> RearrangementResult:
    """Nondecreasing rearrangement of sigma on [0, 2pi] and the integral

        I = int_0^{2pi} sigma_bar(s) ds / (s (log 8pi/s)^{1/2}).

    Quadrature uses s = 8 pi exp(-u^2), under which the measure
    ds/(s sqrt(log 8pi/s)) becomes exactly 2 du, and trapezoid on u; the cap
    u_cap drops only a region where the integrand has decayed (checked).
    """
    samples = np.asarray(sigma_samples, dtype=float)
    if samples.ndim != 1 or len(samples) < min_samples:
        raise ValueError(f"need at least {min_samples} sigma samples on [0, 2pi]")
    if np.any(samples < 0.0):
        raise ValueError("sigma samples must be nonnegative")
    sbar = np.sort(samples)
    quantiles = (np.arange(len(sbar)) + 0.5) / len(sbar) * 2.0 * np.pi

    u_min = math.sqrt(math.log(4.0))
    us = np.arange(u_min, u_cap + du, du)
    ss = 8.0 * np.pi * np.exp(-(us**2))
    vals = np.interp(ss, quantiles, sbar, left=sbar[0], right=sbar[-1])
    integrand = 2.0 * vals
    I = float(np.trapezoid(integrand, us))
    # remaining mass if the integrand froze at its final value: it only fails
    # to be negligible when sigma_bar does not vanish at 0 (true divergence)
    peak = float(integrand.max(initial=0.0))
    diverged = bool(peak > 0.0 and integrand[-1] > 1e-6 * peak)
    return RearrangementResult(sbar, I, diverged, u_min, float(us[-1]))


def I_majorant(alpha: float, gamma: float) -> float:
    """2^{1-alpha/2} sqrt(gamma) int_0^{2pi} s^{alpha/2 - 1} (log 8pi/s)^{-1/2} ds,
    in closed form via the gaussian substitution."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    u_min = math.sqrt(math.log(4.0))
    integral = (2.0 * (8.0 * np.pi) ** (alpha / 2.0)
                * math.sqrt(math.pi / (2.0 * alpha))
                * float(erfc(u_min * math.sqrt(alpha / 2.0))))
    return 2.0 ** (1.0 - alpha / 2.0) * math.sqrt(gamma) * integral
