"""Dense Hermitian semidefinite programming on top of a primal-dual
interior-point core.

Problems are stated over complex Hermitian matrix blocks plus nonnegative
scalars.  Each block is embedded as a real symmetric matrix of twice the
dimension ([[Re, -Im], [Im, Re]]) and handed to the conic interior-point
solver in scaled-triangle (svec) coordinates; Tr{C X} maps to the svec inner
product of the embeddings divided by two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

__all__ = [
    "LinearFunctional",
    "LmiTermBlock",
    "LmiConstraint",
    "SdpProblem",
    "SdpSolution",
    "solve_sdp",
]


@dataclass(frozen=True)
class LinearFunctional:
    """sum_j Tr{C_j X_j} + sum_k d_k s_k over blocks X_j and scalars s_k."""

    blocks: dict = field(default_factory=dict)    # block index -> Hermitian coeff
    scalars: dict = field(default_factory=dict)   # scalar index -> float

    def value(self, blocks: list, scalars: np.ndarray) -> float:
        total = 0.0
        for j, c in self.blocks.items():
            total += float(np.trace(c @ blocks[j]).real)
        for k, d in self.scalars.items():
            total += d * float(scalars[k])
        return total


@dataclass(frozen=True)
class LmiTermBlock:
    """Contribution coeff * G X_block G^H to a linear matrix inequality."""

    block: int
    congruence: np.ndarray
    coeff: float = 1.0


@dataclass(frozen=True)
class LmiConstraint:
    """const + sum coeff_l G_l X_l G_l^H + sum_k s_k B_k  >= 0 (PSD order)."""

    dim: int
    block_terms: tuple = ()
    scalar_terms: tuple = ()            # (scalar index, Hermitian dim x dim)
    const: np.ndarray | None = None


@dataclass(frozen=True)
class SdpProblem:
    """Hermitian-block SDP with scalar variables constrained nonnegative."""

    block_dims: list
    n_scalars: int
    objective: LinearFunctional
    maximize: bool = True
    eq_constraints: list = field(default_factory=list)    # (functional, rhs)
    ineq_constraints: list = field(default_factory=list)  # functional <= rhs
    lmi_constraints: list = field(default_factory=list)


@dataclass(frozen=True)
class SdpSolution:
    blocks: list
    scalars: np.ndarray
    objective: float
    status: str           # "optimal" | "infeasible" | "unbounded" | "max_iter"
    detail: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# svec / embedding helpers
# ---------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)


_SVEC_CACHE: dict = {}


def _svec_len(n: int) -> int:
    return n * (n + 1) // 2


def _svec_maps(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(row, col, scale) index arrays of the upper-triangle columnwise svec."""
    maps = _SVEC_CACHE.get(n)
    if maps is None:
        rows, cols = [], []
        for j in range(n):
            for i in range(j + 1):
                rows.append(i)
                cols.append(j)
        rows_a = np.array(rows)
        cols_a = np.array(cols)
        scale = np.where(rows_a < cols_a, _SQRT2, 1.0)
        maps = (rows_a, cols_a, scale)
        _SVEC_CACHE[n] = maps
    return maps


def _svec(m: np.ndarray) -> np.ndarray:
    """Upper triangle stacked columnwise, off-diagonals scaled by sqrt(2)."""
    rows, cols, scale = _svec_maps(m.shape[0])
    return np.asarray(m)[rows, cols] * scale


def _smat(v: np.ndarray, n: int) -> np.ndarray:
    rows, cols, scale = _svec_maps(n)
    m = np.zeros((n, n))
    m[rows, cols] = v / scale
    m[cols, rows] = m[rows, cols]
    return m


def _emb(c: np.ndarray) -> np.ndarray:
    """Complex Hermitian n x n -> real symmetric 2n x 2n."""
    re, im = np.real(c), np.imag(c)
    return np.block([[re, -im], [im, re]])


def _unembed(y: np.ndarray) -> np.ndarray:
    n = y.shape[0] // 2
    re = 0.5 * (y[:n, :n] + y[n:, n:])
    im = 0.5 * (y[n:, :n] - y[:n, n:])
    x = re + 1j * im
    return 0.5 * (x + x.conj().T)


def _congruence_svec_matrix(g_emb: np.ndarray, n_emb: int) -> np.ndarray:
    """Matrix of svec(emb X) -> svec(G_emb X G_emb^T) for symmetric X."""
    d = g_emb.shape[0]
    cols = []
    for q in range(n_emb):
        gq = g_emb[:, q]
        for p in range(q + 1):
            gp = g_emb[:, p]
            if p == q:
                m = np.outer(gp, gp)
            else:
                m = (np.outer(gp, gq) + np.outer(gq, gp)) / _SQRT2
            cols.append(_svec(m))
    return np.array(cols).T  # (svec_len(d), svec_len(n_emb))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def _status_of(raw: str) -> tuple[str, str]:
    if raw == "Solved":
        return "optimal", raw
    if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return "infeasible", raw
    if raw in ("DualInfeasible", "AlmostDualInfeasible"):
        return "unbounded", raw
    return "max_iter", raw


def solve_sdp(
    p: SdpProblem,
    tol: float = 1e-9,
    max_iter: int = 200,
    verbose: bool = False,
) -> SdpSolution:
    """Solve an SdpProblem; duality gap and feasibility tolerances set to tol."""
    n_blocks = len(p.block_dims)
    emb_dims = [2 * n for n in p.block_dims]
    svec_lens = [_svec_len(d) for d in emb_dims]
    block_offset = np.concatenate([[0], np.cumsum(svec_lens)]).astype(int)
    n_block_vars = int(block_offset[-1])
    n_vars = n_block_vars + p.n_scalars

    def functional_row(f: LinearFunctional) -> np.ndarray:
        row = np.zeros(n_vars)
        for j, c in f.blocks.items():
            lo = block_offset[j]
            row[lo : lo + svec_lens[j]] = 0.5 * _svec(_emb(np.asarray(c)))
        for k, d in f.scalars.items():
            row[n_block_vars + k] = d
        return row

    q = functional_row(p.objective)
    if p.maximize:
        q = -q

    a_rows: list = []
    b_vals: list = []
    cones: list = []

    # equalities -> zero cone
    if p.eq_constraints:
        for f, rhs in p.eq_constraints:
            a_rows.append(sparse.csr_matrix(functional_row(f)))
            b_vals.append(rhs)
        cones.append(clarabel.ZeroConeT(len(p.eq_constraints)))

    # inequalities and scalar nonnegativity -> nonnegative cone
    n_nonneg = len(p.ineq_constraints) + p.n_scalars
    if n_nonneg:
        for f, rhs in p.ineq_constraints:
            a_rows.append(sparse.csr_matrix(functional_row(f)))
            b_vals.append(rhs)
        for k in range(p.n_scalars):
            row = np.zeros(n_vars)
            row[n_block_vars + k] = -1.0
            a_rows.append(sparse.csr_matrix(row))
            b_vals.append(0.0)
        cones.append(clarabel.NonnegativeConeT(n_nonneg))

    # block PSD membership
    for j in range(n_blocks):
        lo = block_offset[j]
        eye = sparse.identity(svec_lens[j], format="csr")
        block = sparse.hstack(
            [
                sparse.csr_matrix((svec_lens[j], lo)),
                -eye,
                sparse.csr_matrix((svec_lens[j], n_vars - lo - svec_lens[j])),
            ],
            format="csr",
        )
        a_rows.append(block)
        b_vals.extend([0.0] * svec_lens[j])
        cones.append(clarabel.PSDTriangleConeT(emb_dims[j]))

    # linear matrix inequalities
    for lmi in p.lmi_constraints:
        d_emb = 2 * lmi.dim
        rows = np.zeros((_svec_len(d_emb), n_vars))
        for term in lmi.block_terms:
            j = term.block
            g_emb = _emb(np.asarray(term.congruence, dtype=complex))
            s_mat = _congruence_svec_matrix(g_emb, emb_dims[j])
            lo = block_offset[j]
            rows[:, lo : lo + svec_lens[j]] -= term.coeff * s_mat
        for k, bmat in lmi.scalar_terms:
            rows[:, n_block_vars + k] -= _svec(_emb(np.asarray(bmat)))
        a_rows.append(sparse.csr_matrix(rows))
        if lmi.const is not None:
            b_vals.extend(_svec(_emb(np.asarray(lmi.const))))
        else:
            b_vals.extend([0.0] * _svec_len(d_emb))
        cones.append(clarabel.PSDTriangleConeT(d_emb))

    a = sparse.vstack(a_rows, format="csc")
    b = np.array(b_vals)
    p_mat = sparse.csc_matrix((n_vars, n_vars))

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol

    solver = clarabel.DefaultSolver(p_mat, q, a, b, cones, settings)
    sol = solver.solve()
    status, detail = _status_of(str(sol.status))

    x = np.asarray(sol.x)
    blocks = []
    for j in range(n_blocks):
        lo = block_offset[j]
        y = _smat(x[lo : lo + svec_lens[j]], emb_dims[j])
        blocks.append(_unembed(y))
    scalars = x[n_block_vars:].copy()
    objective = p.objective.value(blocks, scalars)
    return SdpSolution(
        blocks=blocks, scalars=scalars, objective=objective, status=status, detail=detail
    )
