"""Smallest eigenpairs of constrained symmetric pencils ``A x = theta B x``.

``A`` is symmetric positive semidefinite and given either as a matrix or as
a :class:`MixedForm` ``G^T M^{-1} G`` (the biharmonic numerators).  ``B``
may be singular; directions where ``B`` vanishes carry an infinite quotient
and are counted, not returned.

Two paths share one interface:

* dense, for reduced sizes up to ``dense_limit``: an explicit null-space
  basis of the linear constraints, then the kernel of ``B`` is eliminated by
  a Schur complement and ``scipy.linalg.eigh`` finishes the job;
* sparse, otherwise: shift-invert Lanczos (ARPACK) with a sparse LU of the
  bordered saddle-point system that carries the constraints and the mixed
  variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixedForm:
    """The operator ``G^T M^{-1} G`` with ``M`` symmetric positive definite."""

    G: sp.spmatrix
    M: sp.spmatrix

    @property
    def shape(self):
        return (self.G.shape[1], self.G.shape[1])

    def restrict(self, dofs) -> "MixedForm":
        return MixedForm(self.G.tocsc()[:, dofs].tocsr(), self.M)

    @cached_property
    def lu(self):
        return spla.splu(sp.csc_matrix(self.M))


@dataclass(frozen=True)
class Cluster:
    start: int  # 0-based, inclusive
    stop: int  # exclusive
    value: float

    @property
    def multiplicity(self) -> int:
        return self.stop - self.start

    @property
    def indices(self) -> range:
        """1-based eigenvalue indices in this cluster."""
        return range(self.start + 1, self.stop + 1)


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray  # full-length dof vectors, one per column, B-orthonormal
    residual_norms: np.ndarray
    clusters: list = field(default_factory=list)
    n_infinite: int = 0
    method: str = "dense"

    def multiplicity(self, k: int) -> int:
        """Multiplicity of the cluster holding the 1-based index ``k``."""
        for c in self.clusters:
            if c.start < k <= c.stop:
                return c.multiplicity
        raise IndexError(k)

    def cluster_of(self, k: int) -> Cluster:
        for c in self.clusters:
            if c.start < k <= c.stop:
                return c
        raise IndexError(k)


def cluster(values, tol: float = 5e-3) -> list[Cluster]:
    """Greedy multiplicity groups of ascending values.

    A value joins the current group while its distance to the group's first
    value is at most ``tol * max(1, |value|)``.
    """
    v = np.asarray(values, float)
    out = []
    start = 0
    for i in range(1, len(v) + 1):
        if i == len(v) or v[i] - v[start] > tol * max(1.0, abs(v[i])):
            out.append(Cluster(start, i, float(np.mean(v[start:i]))))
            start = i
    return out


# ------------------------------------------------------------------ helpers


def null_space_basis(C, n: int, rtol: float = 1e-10) -> sp.csr_matrix:
    """Sparse basis ``Z`` of ``{x : C x = 0}``.

    Columns of ``C`` that are identically zero keep identity columns; the
    dense SVD only touches the involved columns.
    """
    C = sp.csc_matrix(C)
    if C.shape[1] != n:
        raise EigenError("constraint matrix has the wrong width")
    involved = np.flatnonzero(np.diff(C.indptr) > 0)
    free = np.setdiff1d(np.arange(n), involved)
    if len(involved) == 0:
        return sp.identity(n, format="csr")
    Cd = C[:, involved].toarray()
    _, s, vt = np.linalg.svd(Cd, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > rtol * max(smax, 1e-300)))
    Nloc = vt[rank:].T  # (len(involved), nullity)
    Nloc[np.abs(Nloc) < 1e-15] = 0.0
    nz = np.nonzero(Nloc)
    return sp.hstack([
        sp.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))),
                      shape=(n, len(free))),
        sp.csr_matrix((Nloc[nz], (involved[nz[0]], nz[1])), shape=(n, Nloc.shape[1])),
    ]).tocsr()


def independent_rows(C, rtol: float = 1e-10):
    """A maximal linearly independent subset of the rows of ``C``."""
    C = sp.csr_matrix(C)
    if C.shape[0] == 0:
        return C
    cols = np.flatnonzero(np.diff(C.tocsc().indptr) > 0)
    Cd = C[:, cols].toarray()
    _, R, piv = sla.qr(Cd.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > rtol * max(d[0], 1e-300))) if len(d) else 0
    return C[np.sort(piv[:rank])]


def _apply_A(A, X):
    if isinstance(A, MixedForm):
        return A.G.T @ A.lu.solve(np.asarray(A.G @ X))
    return A @ X


def _dense_reduced(A, B, Z):
    Zd = Z.toarray() if sp.issparse(Z) else Z
    if isinstance(A, MixedForm):
        GZ = np.asarray((A.G @ Z).toarray() if sp.issparse(Z) else A.G @ Zd)
        Ad = GZ.T @ A.lu.solve(GZ)
    else:
        Ad = Zd.T @ (A @ Zd)
    Bd = Zd.T @ (B @ Zd)
    Ad = 0.5 * (Ad + Ad.T)
    Bd = 0.5 * (Bd + Bd.T)
    return Ad, Bd, Zd


def _solve_dense(Ad, Bd, k, b_rtol=1e-11):
    bval, bvec = np.linalg.eigh(Bd)
    bmax = max(abs(bval).max(), 1e-300) if len(bval) else 1.0
    if bval.min(initial=0.0) < -1e-8 * bmax:
        raise EigenError("B is indefinite on the constraint subspace")
    rng = bval > b_rtol * bmax
    W1 = bvec[:, rng] / np.sqrt(bval[rng])
    W0 = bvec[:, ~rng]
    n_inf = W0.shape[1]
    A11 = W1.T @ Ad @ W1
    if n_inf:
        A00 = W0.T @ Ad @ W0
        A01 = W0.T @ Ad @ W1
        try:
            cf = sla.cho_factor(0.5 * (A00 + A00.T))
        except np.linalg.LinAlgError as exc:
            raise EigenError("A is singular on the kernel of B (indeterminate quotient)") from exc
        X01 = sla.cho_solve(cf, A01)
        S = A11 - A01.T @ X01
    else:
        X01 = np.zeros((0, W1.shape[1]))
        S = A11
    S = 0.5 * (S + S.T)
    kk = min(k, S.shape[0])
    if kk == 0:
        return np.zeros(0), np.zeros((Ad.shape[0], 0)), n_inf
    vals, vecs = sla.eigh(S, subset_by_index=[0, kk - 1])
    X = W1 @ vecs - W0 @ (X01 @ vecs)
    return vals, X, n_inf


def _scale(A, B, n, rng):
    v = rng.standard_normal(n)
    Av = _apply_A(A, v)
    vBv = float(v @ (B @ v))
    if vBv <= 0:
        return 1.0
    return max(abs(float(v @ Av)) / vBv, 1e-300)


def _solve_sparse(A, B, C, k, tol, seed, ncv=None):
    n = B.shape[0]
    rng = np.random.default_rng(seed)
    scale = _scale(A, B, n, rng)
    sigma = -1e-8 * scale
    B = B.tocsr()
    nc = 0 if C is None else C.shape[0]
    if isinstance(A, MixedForm):
        G, M = A.G.tocsr(), A.M.tocsr()
        m = M.shape[0]
        blocks = [[M, -G, None], [G.T, -sigma * B, None if C is None else C.T.tocsr()],
                  [None, C, None]]
        if C is None:
            blocks = [row[:2] for row in blocks[:2]]
        Kb = sp.bmat(blocks, format="csc")
        offset = m
    else:
        Ash = (A - sigma * B).tocsr()
        if C is None:
            Kb = Ash.tocsc()
        else:
            Kb = sp.bmat([[Ash, C.T], [C, None]], format="csc")
        offset = 0
    try:
        lu = spla.splu(Kb, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise EigenError(f"shifted operator is singular: {exc}") from exc
    size = Kb.shape[0]

    def opinv(r):
        rhs = np.zeros(size)
        rhs[offset:offset + n] = np.ravel(r)
        return lu.solve(rhs)[offset:offset + n]

    OPinv = spla.LinearOperator((n, n), matvec=opinv, dtype=float)
    Aop = spla.LinearOperator((n, n), matvec=lambda x: _apply_A(A, x), dtype=float)
    v0 = opinv(B @ rng.standard_normal(n))
    if not np.any(v0):
        v0 = opinv(rng.standard_normal(n))
    kreq = min(k, n - 1 - nc)
    if kreq < 1:
        raise EigenError("subspace too small for the sparse path")
    ncv = ncv or min(n - nc, max(2 * kreq + 1, kreq + 20))
    try:
        vals, vecs = spla.eigsh(Aop, k=kreq, M=B, sigma=sigma, OPinv=OPinv, which="LM",
                                v0=v0, tol=tol, ncv=ncv, maxiter=max(1000, 50 * n))
    except spla.ArpackNoConvergence as exc:
        raise EigenError(f"Lanczos did not converge: {exc}") from exc
    order = np.argsort(vals)
    # structural count: dofs on which B vanishes identically, less the constraints
    n_inf = max(int(n - nc - np.count_nonzero(B.getnnz(axis=1))), 0)
    return vals[order], vecs[:, order], n_inf


def _b_normalize(X, B):
    X = np.array(X, float)
    for j in range(X.shape[1]):
        nb = float(X[:, j] @ (B @ X[:, j]))
        if nb > 0:
            X[:, j] /= np.sqrt(nb)
        # deterministic sign: largest-magnitude entry positive
        i = int(np.argmax(np.abs(X[:, j])))
        if X[i, j] < 0:
            X[:, j] = -X[:, j]
    return X


def _residuals(A, B, C, vals, X):
    R = _apply_A(A, X) - (B @ X) * vals[None, :]
    if C is not None and C.shape[0]:
        # remove the constraint-force component C^T l
        Ct = C.T.tocsc()
        for j in range(R.shape[1]):
            lam = spla.lsqr(Ct, R[:, j], atol=1e-14, btol=1e-14, iter_lim=10 * C.shape[0])[0]
            R[:, j] -= Ct @ lam
    bx = np.sqrt(np.maximum(np.einsum("ij,ij->j", X, B @ X), 1e-300))
    return np.linalg.norm(R, axis=0) / bx


def solve_smallest(A, B, k: int, dofs: Optional[np.ndarray] = None, constraint=None, *,
                   cluster_tol: float = 5e-3, dense_limit: int = 2000, tol: float = 1e-12,
                   seed: int = 20240607, force: Optional[str] = None) -> EigenResult:
    """The ``k`` smallest finite eigenpairs of ``A x = theta B x``.

    Parameters
    ----------
    A : sparse matrix, ndarray or MixedForm
    B : sparse matrix or ndarray, symmetric positive semidefinite
    k : number of eigenpairs
    dofs : optional index set of free dofs; the rest are fixed to zero
    constraint : optional matrix ``C`` (rows over all dofs); ``C x = 0`` is imposed
    force : ``"dense"`` or ``"sparse"`` to override the size-based choice
    """
    if k < 1:
        raise EigenError("k must be at least 1")
    if isinstance(A, MixedForm):
        n_full = A.shape[0]
    else:
        A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
        n_full = A.shape[0]
    B = sp.csr_matrix(B) if not sp.issparse(B) else B.tocsr()
    if dofs is None:
        dofs = np.arange(n_full)
    dofs = np.asarray(dofs)
    Ar = A.restrict(dofs) if isinstance(A, MixedForm) else A[dofs][:, dofs].tocsr()
    Br = B[dofs][:, dofs].tocsr()
    Cr = None
    if constraint is not None:
        Cr = sp.csr_matrix(constraint).tocsc()[:, dofs].tocsr()
        Cr = independent_rows(Cr[np.flatnonzero(np.diff(Cr.indptr) > 0)])
    n = len(dofs)

    use_dense = force == "dense" or (force is None and n <= dense_limit)
    if use_dense:
        Z = null_space_basis(Cr, n) if Cr is not None else sp.identity(n, format="csr")
        if Z.shape[1] < k + 1 and Cr is not None:
            raise EigenError(
                f"constraint null space has dimension {Z.shape[1]}, too small for k={k}"
            )
        Ad, Bd, Zd = _dense_reduced(Ar, Br, Z)
        vals, Y, n_inf = _solve_dense(Ad, Bd, k)
        X = Zd @ Y
        method = "dense"
    else:
        vals, X, n_inf = _solve_sparse(Ar, Br, Cr, k, tol=tol, seed=seed)
        vals, X = vals[:k], X[:, :k]
        method = "sparse"

    X = _b_normalize(X, Br)
    res = _residuals(Ar, Br, Cr, vals, X)
    full = np.zeros((n_full, X.shape[1]))
    full[dofs] = X
    vals = np.asarray(vals, float)
    return EigenResult(vals, full, res, cluster(vals, cluster_tol), int(n_inf), method)
