"""Product vectors inside subspaces of a bipartite space.

The central object is the set of product vectors a (x) b lying in a given
subspace K of C^m (x) C^n.  Membership is measured through an orthonormal
basis {W_r} of the orthocomplement, each W_r viewed as an m x n matrix:

    a (x) b in K   <=>   F(a) b = 0,   F(a) = [a^T conj(W_r)]_r,

and symmetrically G(b) a = 0 with G(b) = [(conj(W_r) b)^T]_r.  The residual
of a unit pair, |F(a) b|, equals the norm of the projection of a (x) b onto
the orthocomplement.

Enumeration runs two independent routes and merges their verified output:

(a) deterministic multistart alternating minimization over unit pairs
    (least right singular vectors of F and G in turn), followed by a batched
    Gauss-Newton polish of the holomorphic system, with local re-seeding
    around found points to split tight root clusters;
(b) for min(m, n) <= 3, the determinantal system: rank deficiency of F(a)
    is expressed through two random row compressions det(U F(a)) = 0, whose
    common projective roots are extracted with a hidden-variable Sylvester
    matrix and a companion (QZ) eigenvalue linearization.

Every candidate from either route is polished and re-verified against the
residual tolerance before it counts.  Classification into Empty / Finite /
LikelyInfinite / Inconclusive is evidence-based and deliberately refuses to
overclaim: Finite needs isolated, transversal points and a start count that
was doubled until the found set stopped changing twice in a row.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import norm, qmc

from .qstate import (
    RANK_TOL,
    BipartiteDims,
    BipartiteState,
    ProductVector,
    SubspaceBasis,
    kernel_basis,
    rank_profile,
    is_ppt,
)
from .zoo import delta

RESIDUAL_TOL = 1e-10
DEDUP_TOL = 1e-6
POLISH_TARGET = 1e-13
_JITTER_SEED = 20240901
_MINOR_SEED = 71


class Classification(enum.Enum):
    EMPTY = "empty"
    FINITE = "finite"
    LIKELY_INFINITE = "likely-infinite"
    INCONCLUSIVE = "inconclusive"


class Goodness(enum.Enum):
    GOOD = "good"
    BAD = "bad"
    INDETERMINATE = "indeterminate"


class GoodnessReason(enum.Enum):
    EMPTY_INTERSECTION = "empty-intersection"
    COUNT_EQUALS_DELTA = "count-equals-delta"
    COUNT_BELOW_DELTA_WITH_NONEMPTY_X = "count-below-delta-with-nonempty-x"
    INFINITE_COMPONENT = "infinite-component"
    RANK_BELOW_BORDERLINE = "rank-below-borderline"


@dataclass(frozen=True)
class EnumerationOptions:
    """Knobs for :func:`enumerate_product_vectors`; defaults follow the docs.

    `start_count` defaults to 40 * delta(m, n) and may not be set below
    4 * delta.  `cross_check` enables the determinantal route (b) where it
    applies; `detect_subspaces` runs the product-line search first so that
    kernels with whole product planes are classified without burning the
    full multistart budget.
    """

    start_count: Optional[int] = None
    residual_tol: float = RESIDUAL_TOL
    dedup_tol: float = DEDUP_TOL
    alternate_iters: int = 60
    polish_iters: int = 16
    max_doublings: int = 4
    cross_check: bool = True
    detect_subspaces: bool = True
    batch_cap: int = 8192


@dataclass(frozen=True)
class LineSubspace:
    """A product subspace inside K: |a> (x) W (side 'A') or V (x) |b> ('B')."""

    side: str
    vector: np.ndarray
    subspace: SubspaceBasis
    residual: float


@dataclass(eq=False)
class EnumerationResult:
    points: list
    residuals: list
    classification: Classification
    evidence: dict

    @property
    def count(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        ev = dict(self.evidence)
        ev["line_subspaces"] = [
            {"side": ls.side, "vector": _c2pairs(ls.vector),
             "subspace_dim": ls.subspace.dim, "residual": ls.residual}
            for ls in ev.get("line_subspaces", [])
        ]
        if not np.isfinite(ev.get("best_residual", 0.0)):
            ev["best_residual"] = None
        for key in ("jacobian_sigma_min", "jacobian_cond"):
            vals = ev.get(key, [])
            if any(not np.isfinite(x) for x in vals):
                ev[key] = [x if np.isfinite(x) else None for x in vals]
        return {
            "classification": self.classification.value,
            "count": self.count,
            "points": [{"a": _c2pairs(p.a), "b": _c2pairs(p.b)} for p in self.points],
            "residuals": list(map(float, self.residuals)),
            "evidence": ev,
        }


@dataclass(frozen=True)
class GoodnessVerdict:
    verdict: Goodness
    reason: Optional[GoodnessReason]
    count: Optional[int] = None
    anomaly: bool = False


def _c2pairs(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v).ravel()]


# ---------------------------------------------------------------------------
# membership machinery


def complement_stack(k: SubspaceBasis, dims: BipartiteDims) -> np.ndarray:
    """Orthonormal basis of the orthocomplement of K, as an (R', m, n) stack."""
    if k.ambient_dim != dims.total:
        raise ValueError(f"subspace lives in dim {k.ambient_dim}, expected {dims.total}")
    if k.dim == 0:
        eye = np.eye(dims.total, dtype=complex)
        return eye.reshape(dims.total, dims.m, dims.n)
    comp = scipy.linalg.null_space(k.vectors.conj())
    return comp.T.reshape(-1, dims.m, dims.n)


def membership_matrices(k: SubspaceBasis, dims: BipartiteDims):
    """(F, G) builders for the subspace: F(a) b = 0 iff a (x) b in K."""
    wc = complement_stack(k, dims).conj()

    def f_of_a(a):
        return np.einsum('i,rij->rj', np.asarray(a, complex), wc)

    def g_of_b(b):
        return np.einsum('rij,j->ri', wc, np.asarray(b, complex))

    return f_of_a, g_of_b


def _pair_residual(wc: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.einsum('i,rij,j->r', a, wc, b)))


def _alternate_batch(wc: np.ndarray, a: np.ndarray, b: np.ndarray, iters: int):
    """Block updates: b <- least right singular vector of F(a), then a of G(b)."""
    for _ in range(iters):
        f = np.einsum('si,rij->srj', a, wc)
        b = np.linalg.svd(f)[2][:, -1, :].conj()
        g = np.einsum('rij,sj->sri', wc, b)
        a = np.linalg.svd(g)[2][:, -1, :].conj()
    f = np.einsum('si,rij->srj', a, wc)
    res = np.linalg.norm(np.einsum('srj,sj->sr', f, b), axis=1)
    return a, b, res


def _polish_batch(wc: np.ndarray, a: np.ndarray, b: np.ndarray, iters: int):
    """Gauss-Newton on the holomorphic system g_r(a, b) = <W_r, a(x)b>.

    One coordinate of each factor (the largest in modulus) is frozen as the
    gauge; the step solves the least squares system through a batched
    pseudoinverse.  Quadratic convergence near simple roots.
    """
    s, m, n = a.shape[0], a.shape[1], b.shape[1]
    rows = np.arange(s)
    for _ in range(iters):
        g = np.einsum('si,rij,sj->sr', a, wc, b)
        res = np.linalg.norm(g, axis=1)
        if res.max() < POLISH_TARGET:
            break
        fa = np.einsum('si,rij->srj', a, wc)
        gb = np.einsum('rij,sj->sri', wc, b)
        jac = np.concatenate([gb, fa], axis=2)            # (s, R', m+n)
        mask = np.ones((s, 1, m + n))
        mask[rows, 0, np.argmax(np.abs(a), axis=1)] = 0.0
        mask[rows, 0, m + np.argmax(np.abs(b), axis=1)] = 0.0
        jac = jac * mask
        u, sv, vh = np.linalg.svd(jac, full_matrices=False)
        inv = np.where(sv > 1e-12 * sv[:, :1], 1.0 / np.where(sv == 0, 1.0, sv), 0.0)
        step = -np.einsum('skx,sk,srk,sr->sx', vh.conj(), inv, u.conj(), g)
        a = a + step[:, :m]
        b = b + step[:, m:]
        a = a / np.linalg.norm(a, axis=1, keepdims=True)
        b = b / np.linalg.norm(b, axis=1, keepdims=True)
    g = np.einsum('si,rij,sj->sr', a, wc, b)
    return a, b, np.linalg.norm(g, axis=1)


def _halton_pairs(count: int, m: int, n: int, skip: int = 0):
    """Deterministic low-discrepancy start pairs on the two unit spheres.

    The sequence's zeroth point (the origin) is always dropped; `skip`
    counts previously consumed pairs so that successive rounds are fresh.
    """
    sampler = qmc.Halton(d=2 * (m + n), scramble=False)
    sampler.fast_forward(skip + 1)
    raw = sampler.random(count)
    z = norm.ppf(np.clip(raw, 1e-12, 1 - 1e-12))
    a = z[:, :m] + 1j * z[:, m:2 * m]
    b = z[:, 2 * m:2 * m + n] + 1j * z[:, 2 * m + n:]
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return a, b


class _PointPool:
    """Accumulates verified points with scale-invariant deduplication."""

    def __init__(self, dedup_tol: float):
        self.tol = dedup_tol
        self.points: list = []
        self.residuals: list = []

    def add(self, pv: ProductVector, residual: float) -> bool:
        for i, q in enumerate(self.points):
            if pv.overlap(q) > 1.0 - self.tol:
                if residual < self.residuals[i]:
                    self.points[i] = pv
                    self.residuals[i] = residual
                return False
        self.points.append(pv)
        self.residuals.append(residual)
        return True

    def matches(self, other_points: list) -> bool:
        if len(other_points) != len(self.points):
            return False
        return all(any(p.overlap(q) > 1.0 - self.tol for q in other_points)
                   for p in self.points)

    def snapshot(self) -> list:
        return list(self.points)


# ---------------------------------------------------------------------------
# determinantal route


def _polyeig(smats: Sequence[np.ndarray]) -> np.ndarray:
    """Finite eigenvalues of the matrix polynomial sum_j smats[j] s^j.

    First companion linearization; the generalized eigenvalues of the pencil
    are the roots of det S(s).  Infinite eigenvalues are dropped.
    """
    deg = len(smats) - 1
    while deg > 0 and np.abs(smats[deg]).max() < 1e-14:
        deg -= 1
    if deg == 0:
        return np.empty(0, dtype=complex)
    d = smats[0].shape[0]
    big_a = np.zeros((d * deg, d * deg), dtype=complex)
    big_b = np.zeros((d * deg, d * deg), dtype=complex)
    for r in range(deg - 1):
        big_a[r * d:(r + 1) * d, (r + 1) * d:(r + 2) * d] = np.eye(d)
        big_b[r * d:(r + 1) * d, r * d:(r + 1) * d] = np.eye(d)
    for j in range(deg):
        big_a[(deg - 1) * d:, j * d:(j + 1) * d] = -smats[j]
    big_b[(deg - 1) * d:, (deg - 1) * d:] = smats[deg]
    w = scipy.linalg.eigvals(big_a, big_b)
    return w[np.isfinite(w)]


def _poly_roots_companion(coeffs_ascending: np.ndarray) -> np.ndarray:
    """Roots via the companion matrix, with negligible leading coeffs removed."""
    c = np.asarray(coeffs_ascending, dtype=complex)[::-1]
    top = np.abs(c).max()
    if top == 0:
        return np.empty(0, dtype=complex)
    nz = np.nonzero(np.abs(c) > 1e-12 * top)[0]
    c = c[nz[0]:]
    if c.size <= 1:
        return np.empty(0, dtype=complex)
    return np.roots(c)


def _det_samples_to_coeffs(vals: np.ndarray) -> np.ndarray:
    """Coefficients of a polynomial sampled on the roots of unity (exact FFT)."""
    return np.fft.fft(vals) / vals.size


def minor_system_roots(k: SubspaceBasis, dims: BipartiteDims) -> list:
    """Candidate A-factors of product vectors in K via the determinantal system.

    For m = 2 or 3 only.  Rank deficiency of the (R' x n) membership matrix
    F(a) is certified by det(U_i F(a)) = 0 for two fixed random row
    compressions U_i; roots are found per projective chart with companion /
    QZ eigenvalue methods (hidden-variable Sylvester resultant when m = 3).
    Candidates are unverified; callers must polish and check residuals.
    """
    m, n = dims.m, dims.n
    if m not in (2, 3):
        raise ValueError(f"determinantal route supports m = 2 or 3, got m={m}")
    wc = complement_stack(k, dims).conj()
    rp = wc.shape[0]
    if rp < n:
        raise ValueError("orthocomplement too small: F(a) is rank deficient for every a")
    rng = np.random.default_rng(_MINOR_SEED)
    u1 = rng.standard_normal((n, rp)) + 1j * rng.standard_normal((n, rp))
    u2 = rng.standard_normal((n, rp)) + 1j * rng.standard_normal((n, rp))
    # random unitary chart rotation: avoids roots parked at chart infinity
    rot = np.linalg.qr(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))[0]
    amats = [np.einsum('i,rij->rj', rot[:, i], wc) for i in range(m)]

    def fmat(coeffs):
        return sum(c * amat for c, amat in zip(coeffs, amats))

    cands = []
    if m == 2:
        k1 = n + 1
        ws = np.exp(2j * np.pi * np.arange(k1) / k1)
        vals = np.array([np.linalg.det(u1 @ fmat([1.0, s])) for s in ws])
        for s in _poly_roots_companion(_det_samples_to_coeffs(vals)):
            cands.append(np.array([1.0, s]))
        cands.append(np.array([0.0, 1.0]))
    else:
        k1 = n + 1
        ws = np.exp(2j * np.pi * np.arange(k1) / k1)
        pgrid = np.array([[np.linalg.det(u1 @ fmat([1.0, s, t])) for t in ws] for s in ws])
        qgrid = np.array([[np.linalg.det(u2 @ fmat([1.0, s, t])) for t in ws] for s in ws])
        scale = max(np.abs(pgrid).max(), np.abs(qgrid).max(), 1e-300)
        pcoef = np.fft.fft2(pgrid / scale) / k1 ** 2      # [i, j] -> s^i t^j
        qcoef = np.fft.fft2(qgrid / scale) / k1 ** 2
        # Sylvester matrix in t, entries polynomial in s of degree <= n
        smats = [np.zeros((2 * n, 2 * n), dtype=complex) for _ in range(k1)]
        for i in range(k1):
            for r in range(n):
                for c in range(n + 1):
                    smats[i][r, r + c] = pcoef[i, n - c]
                    smats[i][n + r, r + c] = qcoef[i, n - c]
        for s in _polyeig(smats):
            t_pencil = scipy.linalg.eigvals(u1 @ fmat([1.0, s, 0.0]), -u1 @ amats[2])
            for t in t_pencil[np.isfinite(t_pencil)]:
                cands.append(np.array([1.0, s, t]))
        t_inf = scipy.linalg.eigvals(u1 @ amats[1], -u1 @ amats[2])
        for t in t_inf[np.isfinite(t_inf)]:
            cands.append(np.array([0.0, 1.0, t]))
        cands.append(np.array([0.0, 0.0, 1.0]))
    out = []
    for c in cands:
        nrm = np.linalg.norm(c)
        if np.isfinite(nrm) and nrm > 1e-12:
            out.append(rot @ (c / nrm))
    return out


def pencil_roots_2xn(k: SubspaceBasis, dims: BipartiteDims,
                     residual_tol: float = RESIDUAL_TOL) -> list:
    """Product vectors in a subspace of C^2 (x) C^n whose membership matrix
    is square: the single determinant condition det F((1, t)) = 0.

    Serves as an independent oracle for the multistart enumerator: the
    polynomial is interpolated exactly on roots of unity and solved with the
    companion matrix, plus the chart point a = (0, 1).  Each root is
    verified against the residual tolerance before being returned.
    """
    if dims.m != 2:
        raise ValueError("pencil oracle requires m = 2")
    wc = complement_stack(k, dims).conj()
    if wc.shape[0] != dims.n:
        raise ValueError(f"membership matrix is {wc.shape[0]}x{dims.n}, must be square")
    a0 = np.einsum('i,rij->rj', np.array([1.0, 0.0]), wc)
    a1 = np.einsum('i,rij->rj', np.array([0.0, 1.0]), wc)
    k1 = dims.n + 1
    ws = np.exp(2j * np.pi * np.arange(k1) / k1)
    vals = np.array([np.linalg.det(a0 + s * a1) for s in ws])
    cands = [np.array([1.0, s]) for s in _poly_roots_companion(_det_samples_to_coeffs(vals))]
    cands.append(np.array([0.0, 1.0]))
    pool = _PointPool(DEDUP_TOL)
    for a in cands:
        a = a / np.linalg.norm(a)
        f = np.einsum('i,rij->rj', a, wc)
        b = np.linalg.svd(f)[2][-1].conj()
        aa, bb, res = _polish_batch(wc, a[None, :], b[None, :], 20)
        if res[0] <= residual_tol:
            pool.add(ProductVector(aa[0], bb[0]), float(res[0]))
    return pool.points


# ---------------------------------------------------------------------------
# product-line detection


def find_line_subspaces(k: SubspaceBasis, dims: BipartiteDims, w_dim: int = 2,
                        starts: int = 64, iters: int = 40,
                        residual_tol: float = RESIDUAL_TOL) -> list:
    """Search for product subspaces |a> (x) W and V (x) |b> inside K.

    Minimizes the sum of squares of the w_dim smallest singular values of
    the membership matrix by alternating between the vector factor and the
    candidate subspace.  Returns every distinct hit whose total residual is
    below the tolerance.
    """
    if w_dim < 2:
        raise ValueError("w_dim must be at least 2")
    m, n = dims.m, dims.n
    wc = complement_stack(k, dims).conj()
    out = []
    if wc.shape[0] == 0:
        eye_n = np.eye(n, dtype=complex)
        eye_m = np.eye(m, dtype=complex)
        if w_dim <= n:
            out.append(LineSubspace("A", np.eye(m, dtype=complex)[0],
                                    SubspaceBasis(n, eye_n[:w_dim], 0.0), 0.0))
        if w_dim <= m:
            out.append(LineSubspace("B", np.eye(n, dtype=complex)[0],
                                    SubspaceBasis(m, eye_m[:w_dim], 0.0), 0.0))
        return out

    for vec, sub, res in _subspace_search(wc, m, n, w_dim, starts, iters, residual_tol):
        out.append(LineSubspace("A", vec, SubspaceBasis(n, sub, residual_tol), res))
    wc_swapped = wc.transpose(0, 2, 1)
    for vec, sub, res in _subspace_search(wc_swapped, n, m, w_dim, starts, iters, residual_tol):
        out.append(LineSubspace("B", vec, SubspaceBasis(m, sub, residual_tol), res))
    return out


def _subspace_search(stack, dim_vec, dim_sub, w_dim, starts, iters, residual_tol,
                     max_hits: int = 8):
    """Multistart minimization of the w_dim smallest singular values of the
    membership matrix over the vector factor; returns (vec, subspace, residual)."""
    if w_dim > dim_sub or w_dim < 1:
        return []
    a, _ = _halton_pairs(starts, dim_vec, dim_sub)
    for _ in range(iters):
        f = np.einsum('si,rij->srj', a, stack)
        vh = np.linalg.svd(f)[2]
        sub = vh[:, -w_dim:, :].conj()                        # (s, w_dim, dim_sub)
        g = np.einsum('rij,swj->swri', stack, sub).reshape(a.shape[0], -1, dim_vec)
        a = np.linalg.svd(g)[2][:, -1, :].conj()
    f = np.einsum('si,rij->srj', a, stack)
    sv = np.linalg.svd(f, compute_uv=False)
    h = np.linalg.norm(sv[:, -w_dim:], axis=1)
    hits = []
    for idx in np.argsort(h):
        if h[idx] > residual_tol:
            break
        vec = a[idx]
        if any(abs(np.vdot(vec, prev[0])) > 1 - DEDUP_TOL for prev in hits):
            continue
        vh = np.linalg.svd(np.einsum('i,rij->rj', vec, stack))[2]
        sub = vh[-w_dim:, :].conj()
        hits.append((vec, sub, float(h[idx])))
        if len(hits) >= max_hits:
            break
    return hits


# ---------------------------------------------------------------------------
# enumeration


def enumerate_product_vectors(k: SubspaceBasis, dims: BipartiteDims,
                              opts: Optional[EnumerationOptions] = None) -> EnumerationResult:
    """Find the product vectors inside K; see the module docstring.

    The returned points are pairwise distinct under the overlap metric and
    each satisfies |proj_{K^perp}(a (x) b)| <= opts.residual_tol.
    """
    opts = opts or EnumerationOptions()
    m, n = dims.m, dims.n
    dlt = delta(m, n)
    n0 = opts.start_count if opts.start_count is not None else 40 * dlt
    if n0 < 4 * dlt:
        raise ValueError(f"start_count must be at least {4 * dlt} (4*delta), got {n0}")
    evidence: dict = {"delta": dlt, "starts_used": 0, "rounds": 0,
                      "best_residual": float("inf"), "line_subspaces": [],
                      "raw_accepted": 0, "stable": False, "minor_system": None,
                      "near_duplicate_chain": 0,
                      "transversal": [], "jacobian_sigma_min": []}
    if k.dim == 0:
        return EnumerationResult([], [], Classification.EMPTY, evidence)
    wc = complement_stack(k, dims).conj()

    if opts.detect_subspaces:
        evidence["line_subspaces"] = find_line_subspaces(
            k, dims, w_dim=2, residual_tol=opts.residual_tol)
    has_lines = bool(evidence["line_subspaces"])

    if wc.shape[0] == 0:
        evidence["trivial_full_space"] = True
        return EnumerationResult([], [], Classification.LIKELY_INFINITE, evidence)

    pool = _PointPool(opts.dedup_tol)
    raw_pts: list = []
    jitter_rng = np.random.default_rng(_JITTER_SEED)

    def polish_and_collect(a, b, skip_alternate=False):
        if a.shape[0] == 0:
            return
        if not skip_alternate:
            a, b, _ = _alternate_batch(wc, a, b, opts.alternate_iters)
        a, b, res = _polish_batch(wc, a, b, opts.polish_iters)
        evidence["best_residual"] = min(evidence["best_residual"], float(res.min()))
        ok = res <= opts.residual_tol
        evidence["raw_accepted"] += int(ok.sum())
        for idx in np.nonzero(ok)[0]:
            pv = ProductVector(a[idx], b[idx])
            raw_pts.append(pv)
            pool.add(pv, float(res[idx]))

    def jitter_round():
        if not pool.points:
            return
        seeds_a, seeds_b = [], []
        for pv in pool.points:
            for scale in (3e-2, 3e-3):
                for _ in range(4):
                    seeds_a.append(pv.a + scale * (jitter_rng.standard_normal(m)
                                                   + 1j * jitter_rng.standard_normal(m)))
                    seeds_b.append(pv.b + scale * (jitter_rng.standard_normal(n)
                                                   + 1j * jitter_rng.standard_normal(n)))
        a = np.array(seeds_a)
        b = np.array(seeds_b)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        for lo in range(0, a.shape[0], opts.batch_cap):
            polish_and_collect(a[lo:lo + opts.batch_cap], b[lo:lo + opts.batch_cap],
                               skip_alternate=True)

    # With a product line in the kernel the set is infinite; sample a few
    # points for the report but skip the stabilization ladder.
    if has_lines:
        budget = [min(n0, max(4 * dlt, 256))]
    else:
        budget = [n0] + [n0 * (1 << i) for i in range(opts.max_doublings)]

    skip = 0
    stable_streak = 0
    for round_idx, count in enumerate(budget):
        before = pool.snapshot()
        for lo in range(0, count, opts.batch_cap):
            chunk = min(opts.batch_cap, count - lo)
            a, b = _halton_pairs(chunk, m, n, skip=skip)
            skip += chunk
            polish_and_collect(a, b)
        evidence["starts_used"] += count
        evidence["rounds"] = round_idx + 1
        if round_idx == 0 and opts.cross_check and min(m, n) <= 3 and wc.shape[0] >= max(m, n):
            _merge_minor_roots(pool, raw_pts, k, dims, wc, opts, evidence)
        jitter_round()
        if round_idx > 0:
            stable_streak = stable_streak + 1 if pool.matches(before) else 0
            if stable_streak >= 2:
                evidence["stable"] = True
                break
        if len(pool.points) > dlt:
            break   # finite sets cannot exceed delta; this one is infinite

    points, residuals = pool.points, pool.residuals
    order = np.argsort(residuals) if residuals else []
    points = [points[i] for i in order]
    residuals = [residuals[i] for i in order]

    # isolation and transversality of each point
    trans, jmins, jconds = [], [], []
    for pv in points:
        trans.append(transversal(k, pv, dims, residual_tol=max(opts.residual_tol, 1e-9)))
        smin, smax = _jacobian_extremes(wc, pv)
        jmins.append(smin)
        jconds.append(smax / smin if smin > 0 else float("inf"))
    evidence["transversal"] = trans
    evidence["jacobian_sigma_min"] = jmins
    evidence["jacobian_cond"] = jconds
    evidence["near_duplicate_chain"] = _chain_evidence(raw_pts, opts.dedup_tol, dlt)

    if has_lines or len(points) > dlt or evidence["near_duplicate_chain"]:
        cls = Classification.LIKELY_INFINITE
    elif not points:
        cls = Classification.EMPTY
    elif evidence["stable"] and all(trans):
        cls = Classification.FINITE
    else:
        cls = Classification.INCONCLUSIVE
    return EnumerationResult(points, residuals, cls, evidence)


def _merge_minor_roots(pool, raw_pts, k, dims, wc, opts, evidence):
    """Verify and merge candidates from the determinantal route."""
    swapped = dims.m > dims.n
    kk, dd = (_swap_subspace(k, dims), BipartiteDims(dims.n, dims.m)) if swapped else (k, dims)
    try:
        cands = minor_system_roots(kk, dd)
    except ValueError:
        evidence["minor_system"] = {"skipped": True}
        return
    wcd = complement_stack(kk, dd).conj()
    verified = 0
    extra = 0
    for a in cands:
        f = np.einsum('i,rij->rj', a, wcd)
        sv, vh = np.linalg.svd(f)[1:]
        if sv[-1] > 1e-2:
            continue
        b = vh[-1].conj()
        aa, bb, res = _polish_batch(wcd, a[None, :], b[None, :], 25)
        if res[0] <= opts.residual_tol:
            verified += 1
            pv = ProductVector(bb[0], aa[0]) if swapped else ProductVector(aa[0], bb[0])
            raw_pts.append(pv)
            if pool.add(pv, float(res[0])):
                extra += 1
    evidence["minor_system"] = {"candidates": len(cands), "verified": verified,
                                "new_points": extra}


def _swap_subspace(k: SubspaceBasis, dims: BipartiteDims) -> SubspaceBasis:
    """The same subspace viewed in C^n (x) C^m (parties exchanged)."""
    vecs = k.vectors.reshape(-1, dims.m, dims.n).transpose(0, 2, 1).reshape(-1, dims.total)
    return SubspaceBasis(dims.total, vecs, k.tol_used)


def _jacobian_extremes(wc: np.ndarray, pv: ProductVector) -> tuple:
    """(sigma_min, sigma_max) of the gauge-fixed Jacobian at a root; a zero
    sigma_min marks a non-isolated root."""
    m = pv.a.size
    fa = np.einsum('i,rij->rj', pv.a, wc)
    gb = np.einsum('rij,j->ri', wc, pv.b)
    jac = np.concatenate([gb, fa], axis=1)
    jac = np.delete(jac, [int(np.argmax(np.abs(pv.a))), m + int(np.argmax(np.abs(pv.b)))], axis=1)
    if jac.shape[1] == 0:
        return float("inf"), float("inf")
    sv = np.linalg.svd(jac, compute_uv=False)
    smin = float(sv[-1]) if jac.shape[0] >= jac.shape[1] else 0.0
    return smin, float(sv[0])


def _chain_evidence(raw_pts: list, dedup_tol: float, dlt: int) -> int:
    """Size of the largest near-duplicate chain that is not a single point.

    Accepted points sampled from a positive-dimensional component cluster at
    coarse overlap (> 1 - 1e-3) without collapsing at the dedup tolerance;
    a chain longer than 3*delta is strong continuum evidence.  Returns the
    chain size if that threshold is passed, else 0.
    """
    if len(raw_pts) < 3 * dlt:
        return 0
    reps: list = []       # (representative, coarse_count, distinct_members)
    for pv in raw_pts:
        placed = False
        for rep in reps:
            if pv.overlap(rep[0]) > 1 - 1e-3:
                rep[1] += 1
                if all(pv.overlap(q) <= 1 - dedup_tol for q in rep[2]):
                    rep[2].append(pv)
                placed = True
                break
        if not placed:
            reps.append([pv, 1, [pv]])
    worst = 0
    for rep in reps:
        if len(rep[2]) >= 2 and rep[1] > 3 * dlt:
            worst = max(worst, rep[1])
    return worst


# ---------------------------------------------------------------------------
# verdicts


def is_ces(subspace: SubspaceBasis, dims: BipartiteDims,
           opts: Optional[EnumerationOptions] = None) -> bool:
    """Whether the subspace contains no product vectors (numerical certificate).

    Subspaces of dimension above (m-1)(n-1) always contain one, so those
    return False without a search.
    """
    return ces_certificate(subspace, dims, opts)[0]


def ces_certificate(subspace: SubspaceBasis, dims: BipartiteDims,
                    opts: Optional[EnumerationOptions] = None):
    """(verdict, enumeration) pair backing :func:`is_ces`."""
    if subspace.dim > (dims.m - 1) * (dims.n - 1):
        res = EnumerationResult([], [], Classification.LIKELY_INFINITE,
                                {"dimension_forces_product_vectors": True,
                                 "line_subspaces": []})
        return False, res
    result = enumerate_product_vectors(subspace, dims, opts)
    return result.classification == Classification.EMPTY, result


def transversal(k: SubspaceBasis, pv: ProductVector, dims: BipartiteDims,
                residual_tol: float = 1e-9, rank_tol: float = RANK_TOL) -> bool:
    """Whether K and the tangent space of the product manifold at a (x) b
    together span the whole space: rank [K | a(x)e_j | e_i(x)b] = m*n."""
    resid = k.project_residual(pv.vec())
    if resid > residual_tol * 10:
        raise ValueError(f"product vector is not in the subspace: residual {resid:.3e}")
    m, n = dims.m, dims.n
    cols = [k.vectors.T]
    tang = np.zeros((dims.total, m + n), dtype=complex)
    for j in range(n):
        tang[:, j] = np.kron(pv.a, np.eye(n)[j])
    for i in range(m):
        tang[:, n + i] = np.kron(np.eye(m)[i], pv.b)
    stacked = np.hstack([k.vectors.T, tang])
    sv = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    return rank == dims.total


def partial_conjugate(pv: ProductVector) -> ProductVector:
    """The product vector conj(a) (x) b."""
    return ProductVector(pv.a.conj(), pv.b)


def general_position(pvs: Sequence[ProductVector], dims: BipartiteDims,
                     tol: float = 1e-8, max_subsets: int = 500_000) -> bool:
    """Every <= m of the A-factors and every <= n of the B-factors must be
    linearly independent.

    Checking the maximal subset size suffices (subsets of independent
    families are independent); all subsets are tested through one batched
    SVD per side.  The subset count grows combinatorially, so families whose
    check would exceed `max_subsets` are rejected with a ValueError rather
    than silently truncated.
    """
    def side_ok(vecs, bound):
        count = len(vecs)
        size = min(bound, count)
        if size == 0:
            return True
        n_sub = math.comb(count, size)
        if n_sub > max_subsets:
            raise ValueError(f"general position check needs {n_sub} subsets, "
                             f"above the budget of {max_subsets}")
        idx = np.array(list(itertools.combinations(range(count), size)))
        stacks = np.asarray(vecs)[idx]                       # (n_sub, size, dim)
        sv = np.linalg.svd(stacks, compute_uv=False)
        return bool(np.all(sv[:, -1] > tol * sv[:, 0]))

    return (side_ok([pv.a for pv in pvs], dims.m)
            and side_ok([pv.b for pv in pvs], dims.n))


def classify_goodness(state: BipartiteState,
                      opts: Optional[EnumerationOptions] = None,
                      enumeration: Optional[EnumerationResult] = None) -> GoodnessVerdict:
    """Good/bad verdict for a state from the product vectors in its kernel.

    Decision table, with r = rank and the borderline at m + n - 2:
    above the borderline the state is good iff the kernel holds no product
    vectors; at the borderline good means a finite count equal to
    delta(m, n); below it the verdict is left to the separable route.
    A finite count strictly below delta at the borderline contradicts what
    finite intersections can do for PPT states, so it is flagged as a
    numerical anomaly (likely missed roots) for PPT inputs rather than
    silently classified.
    """
    dims = state.dims
    borderline = dims.m + dims.n - 2
    rank = rank_profile(state).rank
    if rank < borderline:
        return GoodnessVerdict(Goodness.INDETERMINATE, GoodnessReason.RANK_BELOW_BORDERLINE)
    enn = enumeration
    if enn is None:
        enn = enumerate_product_vectors(kernel_basis(state), dims, opts)
    dlt = delta(dims.m, dims.n)
    if rank > borderline:
        if enn.classification == Classification.EMPTY:
            return GoodnessVerdict(Goodness.GOOD, GoodnessReason.EMPTY_INTERSECTION, count=0)
        if enn.classification == Classification.LIKELY_INFINITE:
            return GoodnessVerdict(Goodness.BAD, GoodnessReason.INFINITE_COMPONENT)
        if enn.classification == Classification.FINITE:
            return GoodnessVerdict(Goodness.BAD,
                                   GoodnessReason.COUNT_BELOW_DELTA_WITH_NONEMPTY_X,
                                   count=enn.count)
        return GoodnessVerdict(Goodness.INDETERMINATE, None, count=enn.count)
    # borderline rank
    if enn.classification == Classification.LIKELY_INFINITE:
        return GoodnessVerdict(Goodness.BAD, GoodnessReason.INFINITE_COMPONENT)
    if enn.classification == Classification.FINITE and enn.count == dlt:
        return GoodnessVerdict(Goodness.GOOD, GoodnessReason.COUNT_EQUALS_DELTA, count=dlt)
    if enn.classification in (Classification.FINITE, Classification.EMPTY):
        ppt = is_ppt(state)[0]
        verdict = Goodness.BAD if ppt else Goodness.INDETERMINATE
        return GoodnessVerdict(verdict, GoodnessReason.COUNT_BELOW_DELTA_WITH_NONEMPTY_X,
                               count=enn.count, anomaly=ppt)
    return GoodnessVerdict(Goodness.INDETERMINATE, None, count=enn.count)


# ---------------------------------------------------------------------------
# separable states


def separable_kernel_components(pvs: Sequence[ProductVector], dims: BipartiteDims,
                                tol: float = RANK_TOL) -> list:
    """Inclusion-maximal product subspaces V_P (x) W_Q inside the kernel of
    sum_i |a_i b_i><a_i b_i|, one per partition (P, Q) of the index set.

    V_P is the orthocomplement of the A-factors indexed by P, W_Q of the
    B-factors indexed by Q; the union of the product varieties of the
    returned pairs is exactly the set of product vectors in the kernel.
    """
    npts = len(pvs)
    if npts > 20:
        raise ValueError(f"refusing 2^{npts} partitions; at most 20 terms supported")
    amat = np.array([pv.a for pv in pvs])
    bmat = np.array([pv.b for pv in pvs])
    pairs = []
    for mask in range(1 << npts):
        p_idx = [i for i in range(npts) if mask >> i & 1]
        q_idx = [i for i in range(npts) if not mask >> i & 1]
        vp = _orthocomplement(amat[p_idx], dims.m)
        wq = _orthocomplement(bmat[q_idx], dims.n)
        if vp.dim == 0 or wq.dim == 0:
            continue
        pairs.append((vp, wq))
    keep = []
    for i, (v, w) in enumerate(pairs):
        dominated = False
        for j, (v2, w2) in enumerate(pairs):
            if i == j:
                continue
            if _subspace_leq(v, v2) and _subspace_leq(w, w2):
                if (v.dim, w.dim) != (v2.dim, w2.dim) or i > j:
                    dominated = True
                    break
        if not dominated:
            keep.append((v, w))
    return keep


def _orthocomplement(rows: np.ndarray, ambient: int) -> SubspaceBasis:
    rows = np.asarray(rows, dtype=complex).reshape(-1, ambient)
    if rows.shape[0] == 0:
        return SubspaceBasis(ambient, np.eye(ambient, dtype=complex), RANK_TOL)
    comp = scipy.linalg.null_space(rows.conj())
    return SubspaceBasis(ambient, comp.T, RANK_TOL)


def _subspace_leq(a: SubspaceBasis, b: SubspaceBasis, tol: float = 1e-9) -> bool:
    if a.dim > b.dim:
        return False
    return all(b.project_residual(v) <= tol for v in a.vectors)


def classify_separable_good(pvs: Sequence[ProductVector], dims: BipartiteDims) -> GoodnessVerdict:
    """Good/bad verdict for a separable state given a pure product
    decomposition spanning its range.

    With r terms and r <= m + n - 2 the state is good iff the factors are in
    general position; with more terms it is good iff for every partition
    (P, Q) of the terms the A-factors of P span the A space or the
    B-factors of Q span the B space.
    """
    npts = len(pvs)
    if npts == 0:
        raise ValueError("need at least one product term")
    if npts > 20:
        raise ValueError(f"refusing 2^{npts} partitions; at most 20 terms supported")
    borderline = dims.m + dims.n - 2
    if npts <= borderline:
        if general_position(pvs, dims):
            reason = (GoodnessReason.COUNT_EQUALS_DELTA if npts == borderline else None)
            count = delta(dims.m, dims.n) if npts == borderline else None
            return GoodnessVerdict(Goodness.GOOD, reason, count=count)
        return GoodnessVerdict(Goodness.BAD, GoodnessReason.INFINITE_COMPONENT)
    amat = np.array([pv.a for pv in pvs])
    bmat = np.array([pv.b for pv in pvs])
    for mask in range(1 << npts):
        p_idx = [i for i in range(npts) if mask >> i & 1]
        q_idx = [i for i in range(npts) if not mask >> i & 1]
        if _spans(amat[p_idx], dims.m) or _spans(bmat[q_idx], dims.n):
            continue
        comps = separable_kernel_components(pvs, dims)
        infinite = any(v.dim + w.dim > 2 for v, w in comps)
        reason = (GoodnessReason.INFINITE_COMPONENT if infinite
                  else GoodnessReason.COUNT_BELOW_DELTA_WITH_NONEMPTY_X)
        return GoodnessVerdict(Goodness.BAD, reason)
    return GoodnessVerdict(Goodness.GOOD, GoodnessReason.EMPTY_INTERSECTION, count=0)


def _spans(rows: np.ndarray, ambient: int, tol: float = RANK_TOL) -> bool:
    rows = np.asarray(rows).reshape(-1, ambient)
    if rows.shape[0] < ambient:
        return False
    sv = np.linalg.svd(rows, compute_uv=False)
    return bool(sv[-1] > tol * sv[0]) if sv.size else False
