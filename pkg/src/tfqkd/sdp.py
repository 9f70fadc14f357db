"""Certified solving of semidefinite programs over a single Gram block.

Problems here maximize a linear functional <C, G> of a positive semidefinite
matrix G subject to linear equality and inequality constraints.  A primal-dual
conic backend (Clarabel) does the heavy lifting, but its output is never
trusted blindly: inequality multipliers are clamped to the correct sign, and
when the reconstructed dual slack matrix dips below the PSD cone, selected
multipliers are bumped along structured "lift" directions until it is PSD
again.  `verify_dual` then re-checks the certificate using nothing but the
problem data, so by weak duality the certified value is a true upper bound on
the maximum even if the solver stopped short of full accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import clarabel
import numpy as np
import scipy.sparse as sp

PSD_EIG_TOL = -1e-8  # eigenvalue tolerance when auditing membership in the PSD cone
FEASIBILITY_TOL = 1e-8  # absolute tolerance on primal constraint residuals
CERTIFIED_GAP_TOL = 1e-6  # |dual bound - primal optimum| allowed for status "optimal"

_REPAIR_SAFETY = 1.25  # overshoot factor when lifting the dual slack diagonal
_REPAIR_ROUNDS = 3


class CertificateError(ValueError):
    """Raised when a dual certificate fails the independent feasibility audit."""


@lru_cache(maxsize=64)
def _svec_indices(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.tril_indices(dim)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return rows, cols, scale


def svec(mat: np.ndarray) -> np.ndarray:
    """Isometric vectorization of a symmetric matrix.

    Stacks the upper triangle column by column with off-diagonal entries
    scaled by sqrt(2), so that svec(A) @ svec(B) equals the Frobenius inner
    product <A, B>.  This is also the layout the conic backend expects for
    its PSD-triangle cone.
    """
    rows, cols, scale = _svec_indices(mat.shape[0])
    return mat[rows, cols] * scale


def unsvec(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of `svec`: rebuild the symmetric matrix from its vectorization."""
    rows, cols, scale = _svec_indices(dim)
    vals = np.asarray(vec, dtype=float) / scale
    mat = np.zeros((dim, dim))
    mat[rows, cols] = vals
    mat[cols, rows] = vals
    return mat


def _locked_symmetric(mat, dim: int, what: str) -> np.ndarray:
    arr = np.array(mat, dtype=float)
    if arr.shape != (dim, dim):
        raise ValueError(f"{what} must be a {dim}x{dim} matrix, got shape {arr.shape}")
    if not np.array_equal(arr, arr.T):
        raise ValueError(f"{what} must be symmetric")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GramSDP:
    """Maximize <objective, G> over PSD G subject to linear constraints.

    equalities are pairs (A, b) meaning <A, G> = b; inequalities are pairs
    (A, u) meaning <A, G> <= u.  index_map names each Gram row by an
    (intensity, residue) pair; when omitted it defaults to (0.0, i) -> i.
    Instances are immutable after construction and safe to share across
    worker processes.
    """

    dim: int
    objective: np.ndarray
    equalities: tuple[tuple[np.ndarray, float], ...] = ()
    inequalities: tuple[tuple[np.ndarray, float], ...] = ()
    index_map: dict[tuple[float, int], int] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(
            self, "objective", _locked_symmetric(self.objective, self.dim, "objective")
        )
        for field, desc in (("equalities", "rhs"), ("inequalities", "bound")):
            locked = []
            for k, item in enumerate(getattr(self, field)):
                mat, rhs = item
                rhs = float(rhs)
                if not math.isfinite(rhs):
                    raise ValueError(f"{field}[{k}] {desc} must be finite, got {rhs}")
                locked.append((_locked_symmetric(mat, self.dim, f"{field}[{k}] matrix"), rhs))
            object.__setattr__(self, field, tuple(locked))
        if self.index_map is None:
            object.__setattr__(self, "index_map", {(0.0, i): i for i in range(self.dim)})
        index_map = dict(self.index_map)
        if len(index_map) != self.dim:
            raise ValueError(
                f"index_map must cover exactly {self.dim} Gram rows, got {len(index_map)}"
            )
        if sorted(index_map.values()) != list(range(self.dim)):
            raise ValueError("index_map values must be a bijection onto 0..dim-1")
        object.__setattr__(self, "index_map", index_map)

    @property
    def n_constraints(self) -> int:
        """Total number of linear constraints (equalities plus inequalities)."""
        return len(self.equalities) + len(self.inequalities)

    def content_digest(self) -> bytes:
        """Hash of the mathematical content, for caching identical instances."""
        import hashlib

        digest = hashlib.sha256()
        digest.update(np.int64(self.dim).tobytes())
        digest.update(self.objective.tobytes())
        for mat, rhs in self.equalities:
            digest.update(mat.tobytes())
            digest.update(np.float64(rhs).tobytes())
        digest.update(b"|")
        for mat, bound in self.inequalities:
            digest.update(mat.tobytes())
            digest.update(np.float64(bound).tobytes())
        return digest.digest()


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Dual multipliers: free-signed for equalities, nonnegative for inequalities."""

    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray

    def __post_init__(self) -> None:
        for name in ("eq_multipliers", "ineq_multipliers"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of one solve.

    status is "optimal" (full audit passed), "infeasible" (no PSD matrix
    satisfies the constraints), or "numerical-limit" (best effort; dual_bound
    is still a valid upper bound whenever the certificate verifies).
    """

    optimum: float
    gram: np.ndarray
    dual_certificate: DualCertificate
    status: str
    dual_bound: float


def _classify_lifts(
    inequalities: tuple[tuple[np.ndarray, float], ...],
) -> tuple[dict[int, tuple[int, float]], dict[int, tuple[int, int, float]]]:
    """Find inequality constraints usable to add mass to the dual slack diagonal.

    A "pure" lift at coordinate i is a diagonal constraint matrix whose only
    nonzero is a positive entry at (i, i): bumping its multiplier raises the
    slack there and costs its bound per unit.  A "transfer" lift is a +1/-1
    diagonal pair whose -1 coordinate itself has a pure lift to absorb it.
    """
    pure: dict[int, tuple[int, float]] = {}
    transfer_cands: dict[int, list[tuple[int, int, float]]] = {}
    for j, (mat, bound) in enumerate(inequalities):
        diag = np.diagonal(mat)
        if np.count_nonzero(mat - np.diag(diag)):
            continue
        nz = np.flatnonzero(diag)
        if len(nz) == 1 and diag[nz[0]] > 0:
            i = int(nz[0])
            cost = bound / diag[i]
            if i not in pure or cost < pure[i][1]:
                pure[i] = (j, cost)
        elif len(nz) == 2:
            pos = [int(i) for i in nz if diag[i] > 0]
            neg = [int(i) for i in nz if diag[i] < 0]
            if len(pos) == 1 and len(neg) == 1 and diag[pos[0]] == 1.0 and diag[neg[0]] == -1.0:
                transfer_cands.setdefault(pos[0], []).append((j, neg[0], bound))
    transfer: dict[int, tuple[int, int, float]] = {}
    for i, cands in transfer_cands.items():
        usable = [(j, sink, bound) for j, sink, bound in cands if sink in pure]
        if usable:
            transfer[i] = min(usable, key=lambda t: t[2] + pure[t[1]][1])
    return pure, transfer


def _repair_dual_slack(
    inequalities: tuple[tuple[np.ndarray, float], ...],
    ineq_multipliers: np.ndarray,
    slack: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Bump inequality multipliers until the dual slack matrix is PSD.

    Each negative eigenpair (lambda, v) of the slack is dominated via
    v v^T <= diag(|v_i| * ||v||_1), so raising diagonal coordinate i by
    need_i = safety * sum_k (-lambda_k) |v_ki| ||v_k||_1 restores PSD-ness.
    Multipliers only ever increase, so dual feasibility of signs is kept and
    the certified bound inflates by at most need . cost, which is tiny at the
    slack deficits a converged interior-point solve leaves behind.
    """
    if not len(inequalities):
        return ineq_multipliers, slack
    pure: dict[int, tuple[int, float]] | None = None
    transfer: dict[int, tuple[int, int, float]] = {}
    for _ in range(_REPAIR_ROUNDS):
        eigvals, eigvecs = np.linalg.eigh(slack)
        if eigvals[0] >= 0.0:
            break
        if pure is None:
            pure, transfer = _classify_lifts(inequalities)
        need = np.zeros(slack.shape[0])
        for k in np.flatnonzero(eigvals < 0.0):
            vec = np.abs(eigvecs[:, k])
            need += (-eigvals[k]) * vec * vec.sum()
        need *= _REPAIR_SAFETY
        bump = np.zeros(len(ineq_multipliers))
        liftable = True
        for i in np.flatnonzero(need):
            i = int(i)
            if i in pure:
                j, _ = pure[i]
                bump[j] += need[i] / inequalities[j][0][i, i]
            elif i in transfer:
                j, sink, _ = transfer[i]
                bump[j] += need[i]
                j_sink, _ = pure[sink]
                bump[j_sink] += need[i] / inequalities[j_sink][0][sink, sink]
            else:
                liftable = False
                break
        if not liftable:
            break
        ineq_multipliers = ineq_multipliers + bump
        for j in np.flatnonzero(bump):
            slack = slack + bump[j] * inequalities[j][0]
    return ineq_multipliers, slack


def _dual_slack(problem: GramSDP, eq_mult: np.ndarray, ineq_mult: np.ndarray) -> np.ndarray:
    slack = -np.array(problem.objective)
    for mult, (mat, _) in zip(eq_mult, problem.equalities):
        if mult != 0.0:
            slack = slack + mult * mat
    for mult, (mat, _) in zip(ineq_mult, problem.inequalities):
        if mult != 0.0:
            slack = slack + mult * mat
    return slack


def _audit(
    problem: GramSDP,
    gram: np.ndarray,
    optimum: float,
    dual_bound: float,
    slack: np.ndarray,
) -> bool:
    if np.linalg.eigvalsh(gram)[0] < PSD_EIG_TOL:
        return False
    for mat, rhs in problem.equalities:
        if abs(float(np.sum(mat * gram)) - rhs) > FEASIBILITY_TOL:
            return False
    for mat, bound in problem.inequalities:
        if float(np.sum(mat * gram)) > bound + FEASIBILITY_TOL:
            return False
    if np.linalg.eigvalsh(slack)[0] < PSD_EIG_TOL:
        return False
    if not abs(dual_bound - optimum) <= CERTIFIED_GAP_TOL:
        return False
    return True


def solve(problem: GramSDP) -> SolveReport:
    """Solve the program and return a report with an audited dual certificate.

    The objective is normalized to unit magnitude and each equality row to
    unit right-hand side before the conic solve (the raw problems here can
    carry coefficients spanning ~1e7, which degrades interior-point accuracy
    past usable levels); multipliers are rescaled back afterwards.  status is
    "optimal" only when the returned matrix is PSD within -1e-8, every
    constraint holds within 1e-8, and the certified dual bound matches the
    primal value within 1e-6 absolute.
    """
    dim = problem.dim
    nvec = dim * (dim + 1) // 2
    n_eq = len(problem.equalities)
    n_ineq = len(problem.inequalities)
    eq_rhs = np.array([rhs for _, rhs in problem.equalities])
    ineq_rhs = np.array([bound for _, bound in problem.inequalities])

    obj_scale = float(np.abs(problem.objective).max()) or 1.0
    eq_scale = np.where(eq_rhs != 0.0, np.abs(eq_rhs), 1.0)

    rows = [svec(mat) / s for (mat, _), s in zip(problem.equalities, eq_scale)]
    rows += [svec(mat) for mat, _ in problem.inequalities]
    rows.append(-np.eye(nvec))
    lhs = sp.csc_matrix(np.vstack(rows))
    rhs = np.concatenate([eq_rhs / eq_scale, ineq_rhs, np.zeros(nvec)])
    cones = []
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
    if n_ineq:
        cones.append(clarabel.NonnegativeConeT(n_ineq))
    cones.append(clarabel.PSDTriangleConeT(dim))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_rel = 1e-11
    settings.tol_gap_abs = 1e-16
    settings.tol_feas = 1e-10
    settings.static_regularization_constant = 1e-9

    solver = clarabel.DefaultSolver(
        sp.csc_matrix((nvec, nvec)),
        -svec(problem.objective / obj_scale),
        lhs,
        rhs,
        cones,
        settings,
    )
    solution = solver.solve()

    if solution.status == clarabel.SolverStatus.PrimalInfeasible:
        return SolveReport(
            optimum=math.nan,
            gram=np.zeros((dim, dim)),
            dual_certificate=DualCertificate(np.zeros(n_eq), np.zeros(n_ineq)),
            status="infeasible",
            dual_bound=math.nan,
        )
    if solution.status == clarabel.SolverStatus.DualInfeasible:
        # primal unbounded above: no finite optimum, no certifiable bound
        return SolveReport(
            optimum=math.inf,
            gram=np.zeros((dim, dim)),
            dual_certificate=DualCertificate(np.zeros(n_eq), np.zeros(n_ineq)),
            status="numerical-limit",
            dual_bound=math.inf,
        )

    gram = unsvec(np.asarray(solution.x), dim)
    optimum = float(np.sum(problem.objective * gram))

    dual_raw = np.asarray(solution.z)
    eq_mult = dual_raw[:n_eq] * (obj_scale / eq_scale)
    ineq_mult = np.maximum(dual_raw[n_eq : n_eq + n_ineq] * obj_scale, 0.0)
    slack = _dual_slack(problem, eq_mult, ineq_mult)
    ineq_mult, slack = _repair_dual_slack(problem.inequalities, ineq_mult, slack)
    dual_bound = float(eq_mult @ eq_rhs + ineq_mult @ ineq_rhs)

    status = "optimal" if _audit(problem, gram, optimum, dual_bound, slack) else "numerical-limit"
    return SolveReport(
        optimum=optimum,
        gram=gram,
        dual_certificate=DualCertificate(eq_mult, ineq_mult),
        status=status,
        dual_bound=dual_bound,
    )


def verify_dual(problem: GramSDP, certificate: DualCertificate) -> float:
    """Audit a dual certificate against the problem data and return its bound.

    Recomputes the dual slack matrix sum(y_i A_i) + sum(z_j B_j) - C from
    scratch, rejects any negative inequality multiplier and any slack
    eigenvalue below -1e-8, and returns the dual objective
    b . y + u . z, which by weak duality upper-bounds the primal maximum.
    """
    eq_mult = np.asarray(certificate.eq_multipliers, dtype=float)
    ineq_mult = np.asarray(certificate.ineq_multipliers, dtype=float)
    if eq_mult.shape != (len(problem.equalities),):
        raise CertificateError(
            f"expected {len(problem.equalities)} equality multipliers, got {eq_mult.shape}"
        )
    if ineq_mult.shape != (len(problem.inequalities),):
        raise CertificateError(
            f"expected {len(problem.inequalities)} inequality multipliers, got {ineq_mult.shape}"
        )
    if not (np.all(np.isfinite(eq_mult)) and np.all(np.isfinite(ineq_mult))):
        raise CertificateError("certificate multipliers must be finite")
    worst = float(ineq_mult.min()) if len(ineq_mult) else 0.0
    if worst < 0.0:
        raise CertificateError(
            f"inequality multiplier sign violation: minimum multiplier {worst}"
        )
    slack = _dual_slack(problem, eq_mult, ineq_mult)
    lam_min = float(np.linalg.eigvalsh(slack)[0])
    if lam_min < PSD_EIG_TOL:
        raise CertificateError(f"dual slack matrix is not PSD: min eigenvalue {lam_min}")
    eq_rhs = np.array([rhs for _, rhs in problem.equalities])
    ineq_rhs = np.array([bound for _, bound in problem.inequalities])
    return float(eq_mult @ eq_rhs + ineq_mult @ ineq_rhs)


def problem_to_json(problem: GramSDP) -> str:
    """Serialize a GramSDP for cross-implementation regression checks.

    Schema: {"dim": int, "index_map": [[intensity, residue, row], ...] sorted
    by row, "objective": dense row-major matrix, "equalities":
    [{"matrix": ..., "rhs": ...}], "inequalities": [{"matrix": ...,
    "bound": ...}]}.  Floats round-trip exactly through this encoding.
    """
    doc = {
        "dim": problem.dim,
        "index_map": sorted(
            ([float(beta), int(n), int(row)] for (beta, n), row in problem.index_map.items()),
            key=lambda entry: entry[2],
        ),
        "objective": problem.objective.tolist(),
        "equalities": [{"matrix": mat.tolist(), "rhs": rhs} for mat, rhs in problem.equalities],
        "inequalities": [
            {"matrix": mat.tolist(), "bound": bound} for mat, bound in problem.inequalities
        ],
    }
    return json.dumps(doc, indent=1)


def problem_from_json(text: str) -> GramSDP:
    """Rebuild a GramSDP from the `problem_to_json` schema."""
    doc = json.loads(text)
    return GramSDP(
        dim=int(doc["dim"]),
        objective=np.array(doc["objective"], dtype=float),
        equalities=tuple(
            (np.array(entry["matrix"], dtype=float), float(entry["rhs"]))
            for entry in doc["equalities"]
        ),
        inequalities=tuple(
            (np.array(entry["matrix"], dtype=float), float(entry["bound"]))
            for entry in doc["inequalities"]
        ),
        index_map={
            (float(beta), int(n)): int(row) for beta, n, row in doc["index_map"]
        },
    )
