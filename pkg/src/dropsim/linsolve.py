"""Matrix-free conjugate-gradient solves of 5-point variable-coefficient systems.

Operators are stored as per-interior-cell stencil coefficients together with a
ghost-coupling policy per side that eliminates the ghost unknowns: ``copy``
(ghost equals adjacent interior), ``negate`` (minus it), ``scaled`` (per-cell
factor times it), or ``value`` (known boundary data, contributing an affine
offset that the solver moves to the right-hand side). All systems assembled
by the flow module are symmetric positive (semi-)definite after elimination;
the singular pure-Neumann pressure system is handled by projecting out the
constant mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    """Iteration failed to meet the residual contract."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class GhostPolicy:
    kind: str                 # copy | negate | value | scaled
    data: object = None       # boundary values for "value", factors for "scaled"

    def __post_init__(self):
        if self.kind not in ("copy", "negate", "value", "scaled"):
            raise ValueError(f"unknown ghost policy {self.kind!r}")
        if self.kind in ("value", "scaled") and self.data is None:
            raise ValueError(f"ghost policy {self.kind!r} needs data")


@dataclass
class SolveOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_iter: int | None = None    # defaults to 10*n*m
    nullspace: str = "none"        # none | constant

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.nullspace not in ("none", "constant"):
            raise ValueError(f"unknown nullspace handling {self.nullspace!r}")


class StencilOperator:
    """Linear 5-point operator on the interior block after ghost elimination."""

    def __init__(self, c, e, w, n, s, policies: dict):
        self.c = np.asarray(c, dtype=float)
        self.e = np.asarray(e, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.n = np.asarray(n, dtype=float)
        self.s = np.asarray(s, dtype=float)
        if not all(a.shape == self.c.shape for a in (self.e, self.w, self.n, self.s)):
            raise ValueError("stencil coefficient arrays must share one shape")
        missing = [side for side in SIDES if side not in policies]
        if missing:
            raise ValueError(f"missing ghost policies for sides {missing}")
        self.policies = dict(policies)
        self.shape = self.c.shape

    def _ghost_strip(self, side, x):
        pol = self.policies[side]
        adjacent = {"left": x[0, :], "right": x[-1, :],
                    "bottom": x[:, 0], "top": x[:, -1]}[side]
        if pol.kind == "copy":
            return adjacent
        if pol.kind == "negate":
            return -adjacent
        if pol.kind == "scaled":
            return np.asarray(pol.data, dtype=float) * adjacent
        return np.zeros_like(adjacent)   # "value": linear part sees zero

    def apply(self, x):
        """Matrix-vector product with the linear part of the operator."""
        x = np.asarray(x, dtype=float)
        nx, ny = self.shape
        pad = np.zeros((nx + 2, ny + 2))
        pad[1:-1, 1:-1] = x
        pad[0, 1:-1] = self._ghost_strip("left", x)
        pad[-1, 1:-1] = self._ghost_strip("right", x)
        pad[1:-1, 0] = self._ghost_strip("bottom", x)
        pad[1:-1, -1] = self._ghost_strip("top", x)
        return (self.c * x
                + self.e * pad[2:, 1:-1] + self.w * pad[:-2, 1:-1]
                + self.n * pad[1:-1, 2:] + self.s * pad[1:-1, :-2])

    def affine_offset(self):
        """Contribution of fixed-value ghosts, to be subtracted from the rhs."""
        off = np.zeros(self.shape)
        for side, coeff, index in (("left", self.w, (0, slice(None))),
                                   ("right", self.e, (-1, slice(None))),
                                   ("bottom", self.s, (slice(None), 0)),
                                   ("top", self.n, (slice(None), -1))):
            pol = self.policies[side]
            if pol.kind == "value":
                off[index] += coeff[index] * np.asarray(pol.data, dtype=float)
        return off

    def diagonal(self):
        """Diagonal of the eliminated operator (Jacobi preconditioner)."""
        diag = self.c.copy()
        for side, coeff, index in (("left", self.w, (0, slice(None))),
                                   ("right", self.e, (-1, slice(None))),
                                   ("bottom", self.s, (slice(None), 0)),
                                   ("top", self.n, (slice(None), -1))):
            pol = self.policies[side]
            if pol.kind == "copy":
                diag[index] += coeff[index]
            elif pol.kind == "negate":
                diag[index] -= coeff[index]
            elif pol.kind == "scaled":
                diag[index] += coeff[index] * np.asarray(pol.data, dtype=float)
        return diag

    def to_csr(self):
        """Assemble the eliminated operator as a scipy CSR matrix."""
        from scipy import sparse
        n, m = self.shape
        idx = np.arange(n * m).reshape(n, m)
        rows = [idx.ravel()]
        cols = [idx.ravel()]
        data = [self.diagonal().ravel()]
        couplings = (
            (self.e[:-1, :], idx[:-1, :], idx[1:, :]),
            (self.w[1:, :], idx[1:, :], idx[:-1, :]),
            (self.n[:, :-1], idx[:, :-1], idx[:, 1:]),
            (self.s[:, 1:], idx[:, 1:], idx[:, :-1]),
        )
        for coeff, r, c in couplings:
            rows.append(r.ravel())
            cols.append(c.ravel())
            data.append(coeff.ravel())
        mat = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * m, n * m))
        return mat.tocsr()

    def splu_preconditioner(self, regularize=0.0):
        """One-time sparse LU of the (optionally shifted) operator as a CG
        preconditioner.

        The operators of this scheme are fixed for a whole run, so a single
        factorization turns every subsequent solve into a couple of CG
        iterations while the CG loop still enforces the residual contract.
        ``regularize`` adds a small multiple of the diagonal scale so the
        singular pure-Neumann pressure operator factors cleanly.
        """
        from scipy import sparse
        from scipy.sparse.linalg import splu
        mat = self.to_csr()
        if regularize:
            scale = regularize * float(np.abs(mat.diagonal()).max())
            mat = (mat + scale * sparse.identity(mat.shape[0], format="csr"))
        lu = splu(mat.tocsc())
        shape = self.shape

        def precond(r):
            return lu.solve(r.ravel()).reshape(shape)

        return precond

    def _banded_upper(self, regularize):
        """Operator in LAPACK upper-banded storage (unknowns ordered k-fastest)."""
        n, m = self.shape
        size = n * m
        ab = np.zeros((m + 1, size))
        diag = self.diagonal().ravel()
        if regularize:
            diag = diag + regularize * float(np.abs(diag).max())
        ab[m, :] = diag
        cols = np.arange(1, size)
        in_row = (cols % m) != 0     # skip couplings across the j seam
        ab[m - 1, cols[in_row]] = self.n.ravel()[cols[in_row] - 1]
        ab[0, m:] = self.e.ravel()[: size - m]
        return ab

    def banded_cholesky_preconditioner(self, regularize=0.0):
        """Banded Cholesky factorization as a CG preconditioner.

        Requires the symmetric face-coefficient structure the flow operators
        have (east of one cell equals west of its neighbor); falls back to
        sparse LU if the shifted factorization is not positive definite.
        """
        from scipy.linalg import cho_solve_banded, cholesky_banded
        if not (np.allclose(self.e[:-1, :], self.w[1:, :])
                and np.allclose(self.n[:, :-1], self.s[:, 1:])):
            return self.splu_preconditioner(regularize)
        try:
            cb = cholesky_banded(self._banded_upper(regularize), lower=False,
                                 check_finite=False)
        except np.linalg.LinAlgError:
            return self.splu_preconditioner(max(regularize, 1e-12))
        shape = self.shape

        def precond(r):
            return cho_solve_banded((cb, False), r.ravel(),
                                    check_finite=False).reshape(shape)

        return precond


def solve(opr: StencilOperator, rhs, opts: SolveOptions | None = None,
          guess=None, stats: dict | None = None, precond=None):
    """Preconditioned CG solve meeting ||A x - b|| <= max(rel_tol ||b||, abs_tol).

    ``precond`` is an optional callable r -> z approximating A^{-1} r;
    the default is diagonal (Jacobi) preconditioning.
    """
    opts = opts or SolveOptions()
    b = np.asarray(rhs, dtype=float) - opr.affine_offset()
    ncells = b.size
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * ncells
    project = opts.nullspace == "constant"
    if project:
        b = b - b.mean()
    x = np.zeros_like(b) if guess is None else np.array(guess, dtype=float)
    if project:
        x -= x.mean()
    target = max(opts.rel_tol * np.linalg.norm(b), opts.abs_tol)

    if precond is None:
        diag = opr.diagonal()
        if np.any(diag <= 0):
            raise SolverError("operator diagonal is not positive; CG needs an SPD system")
        minv = 1.0 / diag
        precond = lambda r: minv * r

    def apply_precond(r):
        z = precond(r)
        if project:
            z = z - z.mean()
        return z

    r = b - opr.apply(x)
    iterations = 0
    res = float(np.linalg.norm(r))
    if res <= target:
        if project:
            x -= x.mean()
        if stats is not None:
            stats["iterations"] = stats.get("iterations", 0)
            stats["solves"] = stats.get("solves", 0) + 1
            stats["residual"] = res
        return x
    z = apply_precond(r)
    p = z.copy()
    rz = float((r * z).sum())
    while res > target:
        if iterations >= max_iter:
            raise SolverError(
                f"CG failed to converge in {max_iter} iterations "
                f"(residual {res:.3e}, target {target:.3e})",
                residual=res, iterations=iterations)
        ap = opr.apply(p)
        pap = float((p * ap).sum())
        if pap <= 0.0:
            raise SolverError(f"non-SPD curvature encountered (pAp={pap:.3e})",
                              residual=res, iterations=iterations)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        iterations += 1
        if iterations % 64 == 0:
            # periodic residual refresh controls roundoff drift
            r = b - opr.apply(x)
            if project:
                r -= r.mean()
        z = apply_precond(r)
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = float(np.linalg.norm(r))
    if project:
        x -= x.mean()
    if stats is not None:
        stats["iterations"] = stats.get("iterations", 0) + iterations
        stats["solves"] = stats.get("solves", 0) + 1
        stats["residual"] = res
    return x
