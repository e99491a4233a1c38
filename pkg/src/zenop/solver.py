"""Small mixed-integer linear modelling layer and solver backends.

Models are assembled column-block-wise with numpy index arrays so that a
whole family of per-hour constraints is added in one call.  Backends only
see the assembled sparse matrices.
"""

from __future__ import annotations

import abc
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

logger = logging.getLogger(__name__)

INF = np.inf

Term = tuple[np.ndarray, "float | np.ndarray"]


class SolverError(RuntimeError):
    """The backend failed without producing a usable status."""


def _fill(value, n: int, dtype) -> np.ndarray:
    """``value`` as a length-``n`` array (scalars and length-1 arrays are repeated)."""
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim == 0 or arr.size == 1:
        return np.full(n, arr.reshape(-1)[0] if arr.ndim else arr, dtype=dtype)
    if arr.shape != (n,):
        raise ValueError(f"expected {n} entries, got shape {arr.shape}")
    return arr


class LinearModel:
    """Mutable container for variables, linear rows and a linear objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._int: list[np.ndarray] = []
        self._cost: list[np.ndarray] = []
        self._extra_cost: list[tuple[np.ndarray, np.ndarray]] = []
        self.n_vars = 0
        self.var_blocks: dict[str, np.ndarray] = {}
        self._rows_i: list[np.ndarray] = []
        self._cols_j: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._row_lo: list[np.ndarray] = []
        self._row_hi: list[np.ndarray] = []
        self.n_rows = 0
        self.row_families: dict[str, list[np.ndarray]] = {}
        self.objective_constant = 0.0
        self._cache = None

    # -- variables ---------------------------------------------------------
    def add_vars(self, name: str, n: int, lb=0.0, ub=INF, integer: bool = False, cost=0.0) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + n)
        self.n_vars += n
        self._lb.append(_fill(lb, n, float))
        self._ub.append(_fill(ub, n, float))
        self._int.append(np.full(n, 1 if integer else 0, dtype=np.uint8))
        self._cost.append(_fill(cost, n, float))
        if name in self.var_blocks:
            raise ValueError(f"duplicate variable block {name!r}")
        self.var_blocks[name] = idx
        self._cache = None
        return idx

    def add_binaries(self, name: str, n: int, cost=0.0) -> np.ndarray:
        return self.add_vars(name, n, 0.0, 1.0, integer=True, cost=cost)

    def add_cost(self, idx: np.ndarray, coef) -> None:
        idx = np.atleast_1d(np.asarray(idx))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        self._extra_cost.append((idx.ravel(), coef.ravel()))
        self._cache = None

    def fix(self, idx, value) -> None:
        lb, ub = self.bounds()
        lb[idx] = value
        ub[idx] = value
        self._lb, self._ub = [lb], [ub]

    # -- rows --------------------------------------------------------------
    def add_rows(self, family: str, terms: Iterable[Term], lo, hi, n: int | None = None) -> np.ndarray:
        """Add ``n`` rows ``lo <= sum(coef * x[idx]) <= hi``.

        Each term is ``(idx, coef)`` where ``idx`` has one variable index per
        row (a scalar index is broadcast) and ``coef`` is scalar or per-row.
        """
        terms = list(terms)
        if n is None:
            n = max((np.size(t[0]) for t in terms), default=np.size(lo))
        rows = np.arange(self.n_rows, self.n_rows + n)
        for idx, coef in terms:
            idx = _fill(idx, n, int)
            coef = _fill(coef, n, float)
            keep = coef != 0.0
            if keep.all():
                self._rows_i.append(rows)
                self._cols_j.append(idx)
                self._vals.append(coef)
            else:
                self._rows_i.append(rows[keep])
                self._cols_j.append(idx[keep])
                self._vals.append(coef[keep])
        self._row_lo.append(_fill(lo, n, float))
        self._row_hi.append(_fill(hi, n, float))
        self.n_rows += n
        self.row_families.setdefault(family, []).append(rows)
        self._cache = None
        return rows

    def add_row(self, family: str, terms: Iterable[Term], lo, hi) -> int:
        """Add a single row whose terms may each span many variables."""
        idx, coef = [], []
        for i, c in terms:
            i = np.atleast_1d(np.asarray(i))
            idx.append(i)
            coef.append(np.broadcast_to(np.asarray(c, dtype=float), i.shape))
        idx = np.concatenate(idx) if idx else np.zeros(0, dtype=int)
        coef = np.concatenate(coef) if coef else np.zeros(0)
        row = self.n_rows
        keep = coef != 0.0
        self._rows_i.append(np.full(np.count_nonzero(keep), row))
        self._cols_j.append(idx[keep])
        self._vals.append(coef[keep])
        self._row_lo.append(np.array([lo], dtype=float))
        self._row_hi.append(np.array([hi], dtype=float))
        self.n_rows += 1
        self.row_families.setdefault(family, []).append(np.array([row]))
        self._cache = None
        return row

    def eq(self, family: str, terms, rhs, n: int | None = None) -> np.ndarray:
        return self.add_rows(family, terms, rhs, rhs, n)

    def le(self, family: str, terms, rhs, n: int | None = None) -> np.ndarray:
        return self.add_rows(family, terms, -INF, rhs, n)

    def ge(self, family: str, terms, rhs, n: int | None = None) -> np.ndarray:
        return self.add_rows(family, terms, rhs, INF, n)

    # -- assembled views ---------------------------------------------------
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._lb:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(self._lb), np.concatenate(self._ub)

    def integrality(self) -> np.ndarray:
        return np.concatenate(self._int) if self._int else np.zeros(0, dtype=np.uint8)

    def objective(self) -> np.ndarray:
        c = np.concatenate(self._cost) if self._cost else np.zeros(0)
        for idx, coef in self._extra_cost:
            np.add.at(c, idx, coef)
        return c

    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        if self._cache is None:
            if self._rows_i:
                i = np.concatenate(self._rows_i)
                j = np.concatenate(self._cols_j)
                v = np.concatenate(self._vals)
            else:
                i = j = np.zeros(0, dtype=int)
                v = np.zeros(0)
            a = sp.csr_matrix((v, (i, j)), shape=(self.n_rows, self.n_vars))
            lo = np.concatenate(self._row_lo) if self._row_lo else np.zeros(0)
            hi = np.concatenate(self._row_hi) if self._row_hi else np.zeros(0)
            self._cache = (a, lo, hi)
        return self._cache

    def family_of_rows(self) -> np.ndarray:
        fam = np.empty(self.n_rows, dtype=object)
        for name, chunks in self.row_families.items():
            for rows in chunks:
                fam[rows] = name
        return fam

    def rows_of(self, family: str) -> np.ndarray:
        chunks = self.row_families.get(family, [])
        return np.concatenate(chunks) if chunks else np.zeros(0, dtype=int)

    def value(self, x: np.ndarray, terms: Sequence[Term]) -> float:
        return float(sum(np.sum(np.asarray(c) * x[np.asarray(i)]) for i, c in terms))

    def write_lp(self, path) -> None:
        """Dump the model in CPLEX-LP style plain text."""
        a, lo, hi = self.matrix()
        c = self.objective()
        lb, ub = self.bounds()
        integ = self.integrality()
        names = np.empty(self.n_vars, dtype=object)
        for block, idx in self.var_blocks.items():
            safe = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in block)
            for k, j in enumerate(idx):
                names[j] = f"{safe}_{k}"
        fam = self.family_of_rows()

        def expr(coefs, cols):
            parts = [f"{'+' if v >= 0 else '-'} {abs(v):.12g} {names[j]}" for v, j in zip(coefs, cols)]
            return " ".join(parts) if parts else "0"

        with open(path, "w") as fh:
            fh.write(f"\\ {self.name}\nMinimize\n obj: ")
            nz = np.nonzero(c)[0]
            fh.write(expr(c[nz], nz) + "\nSubject To\n")
            for r in range(self.n_rows):
                start, stop = a.indptr[r], a.indptr[r + 1]
                body = expr(a.data[start:stop], a.indices[start:stop])
                tag = f"{fam[r]}_{r}"
                if lo[r] == hi[r]:
                    fh.write(f" {tag}: {body} = {lo[r]:.12g}\n")
                else:
                    if np.isfinite(lo[r]):
                        fh.write(f" {tag}_lo: {body} >= {lo[r]:.12g}\n")
                    if np.isfinite(hi[r]):
                        fh.write(f" {tag}_hi: {body} <= {hi[r]:.12g}\n")
            fh.write("Bounds\n")
            for j in range(self.n_vars):
                lo_s = "-inf" if not np.isfinite(lb[j]) else f"{lb[j]:.12g}"
                hi_s = "+inf" if not np.isfinite(ub[j]) else f"{ub[j]:.12g}"
                fh.write(f" {lo_s} <= {names[j]} <= {hi_s}\n")
            ints = np.nonzero(integ)[0]
            if len(ints):
                fh.write("General\n " + " ".join(names[j] for j in ints) + "\n")
            fh.write("End\n")


@dataclass
class SolveResult:
    status: str  # optimal | feasible_gap | infeasible | unbounded
    objective: float = np.nan
    x: np.ndarray | None = None
    gap: float = np.nan
    wall_time: float = 0.0
    message: str = ""
    max_violation: float = 0.0
    infeasible_families: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "feasible_gap")


class SolverBackend(abc.ABC):
    """Anything that can solve an assembled ``LinearModel``."""

    name = "abstract"

    @abc.abstractmethod
    def solve(self, model: LinearModel, mipgap: float, time_limit: float | None) -> SolveResult:
        ...


class ScipyHighsBackend(SolverBackend):
    """HiGHS through ``scipy.optimize.milp``."""

    name = "scipy-highs"

    def solve(self, model: LinearModel, mipgap: float, time_limit: float | None) -> SolveResult:
        t0 = time.perf_counter()
        if model.n_vars == 0:
            return SolveResult("optimal", model.objective_constant, np.zeros(0), 0.0, 0.0)
        c = model.objective()
        lb, ub = model.bounds()
        integ = model.integrality()
        a, lo, hi = model.matrix()
        options = {"mip_rel_gap": float(mipgap), "presolve": True}
        if time_limit is not None:
            options["time_limit"] = float(time_limit)
        constraints = [LinearConstraint(a, lo, hi)] if model.n_rows else []
        res = milp(c, integrality=integ, bounds=Bounds(lb, ub), constraints=constraints, options=options)
        wall = time.perf_counter() - t0
        gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
        if res.status == 0:
            status = "optimal"
        elif res.status == 1 and res.x is not None:
            status = "feasible_gap"
        elif res.status == 2:
            return SolveResult("infeasible", wall_time=wall, message=res.message)
        elif res.status == 3:
            return SolveResult("unbounded", wall_time=wall, message=res.message)
        else:
            raise SolverError(f"{model.name}: backend status {res.status}: {res.message}")
        x = np.asarray(res.x, dtype=float).copy()
        x[integ == 1] = np.round(x[integ == 1]) + 0.0
        obj = float(c @ x) + model.objective_constant
        return SolveResult(status, obj, x, gap, wall, res.message)


class HighspyBackend(SolverBackend):
    """HiGHS through its own Python bindings.

    With ``warm_start`` the final simplex basis of each LP is kept and
    offered to the next LP of identical shape, which pays off when a
    receding-horizon loop re-solves structurally identical windows.
    """

    name = "highspy"

    def __init__(self, warm_start: bool = False):
        self.warm_start = warm_start
        self._bases: dict[tuple[int, int], object] = {}

    def solve(self, model: LinearModel, mipgap: float, time_limit: float | None) -> SolveResult:
        import highspy

        t0 = time.perf_counter()
        if model.n_vars == 0:
            return SolveResult("optimal", model.objective_constant, np.zeros(0), 0.0, 0.0)
        a, lo, hi = model.matrix()
        a = a.tocsc()
        lb, ub = model.bounds()
        integ = model.integrality()
        is_mip = bool(integ.any())

        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", float(mipgap))
        if time_limit is not None:
            h.setOptionValue("time_limit", float(time_limit))
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = a.shape[1], a.shape[0]
        lp.col_cost_ = model.objective()
        lp.col_lower_, lp.col_upper_ = lb, ub
        lp.row_lower_, lp.row_upper_ = lo, hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = a.indptr
        lp.a_matrix_.index_ = a.indices
        lp.a_matrix_.value_ = a.data
        if is_mip:
            # an integrality vector, even all-continuous, routes the model to the MIP solver
            k_int, k_cont = highspy.HighsVarType.kInteger, highspy.HighsVarType.kContinuous
            lp.integrality_ = [k_int if v else k_cont for v in integ.tolist()]
        h.passModel(lp)
        shape = a.shape
        if self.warm_start and not is_mip and shape in self._bases:
            h.setBasis(self._bases[shape])
        h.run()
        wall = time.perf_counter() - t0
        st = h.getModelStatus()
        ms = highspy.HighsModelStatus
        info = h.getInfo()
        has_x = int(info.primal_solution_status) == int(highspy.SolutionStatus.kSolutionStatusFeasible)
        if st == ms.kOptimal:
            status = "optimal"
        elif has_x and st in (ms.kTimeLimit, ms.kIterationLimit, ms.kSolutionLimit, ms.kInterrupt):
            status = "feasible_gap"
        elif st == ms.kInfeasible:
            return SolveResult("infeasible", wall_time=wall, message=h.modelStatusToString(st))
        elif st in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            return SolveResult("unbounded", wall_time=wall, message=h.modelStatusToString(st))
        else:
            raise SolverError(f"{model.name}: backend status {h.modelStatusToString(st)}")
        if self.warm_start and not is_mip:
            self._bases[shape] = h.getBasis()
        x = np.asarray(h.getSolution().col_value, dtype=float)
        x[integ == 1] = np.round(x[integ == 1]) + 0.0
        obj = float(model.objective() @ x) + model.objective_constant
        gap = float(info.mip_gap) if is_mip else 0.0
        return SolveResult(status, obj, x, gap, wall, h.modelStatusToString(st))


_DEFAULT_BACKEND: SolverBackend = HighspyBackend()


def constraint_violation(model: LinearModel, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest scaled violation of rows, bounds and integrality.

    Row violations are divided by ``max(1, sum |a_ij x_j|, |rhs|)`` so that
    gram-scale emission rows and kWh-scale balance rows share one tolerance.
    """
    if model.n_vars == 0:
        return 0.0, np.zeros(0)
    a, lo, hi = model.matrix()
    act = a @ x
    scale = np.maximum(1.0, abs(a) @ np.abs(x))
    with np.errstate(invalid="ignore"):
        fin_lo = np.where(np.isfinite(lo), lo, 0.0)
        fin_hi = np.where(np.isfinite(hi), hi, 0.0)
        scale = np.maximum(scale, np.maximum(np.abs(fin_lo), np.abs(fin_hi)))
    row_v = np.maximum(np.where(np.isfinite(lo), lo - act, 0.0), np.where(np.isfinite(hi), act - hi, 0.0))
    row_v = np.maximum(row_v, 0.0) / scale
    lb, ub = model.bounds()
    bnd_v = np.maximum(np.maximum(lb - x, x - ub), 0.0) / np.maximum(1.0, np.abs(x))
    integ = model.integrality() == 1
    int_v = np.abs(x[integ] - np.round(x[integ]))
    worst = max(row_v.max(initial=0.0), bnd_v.max(initial=0.0), int_v.max(initial=0.0))
    return float(worst), row_v


def infeasibility_hint(model: LinearModel) -> list[str]:
    """Constraint families that need relaxing in an elastic LP relaxation."""
    a, lo, hi = model.matrix()
    lb, ub = model.bounds()
    m, n = a.shape
    # x, s_lo (>= side), s_hi (<= side)
    eye = sp.identity(m, format="csr")
    big = sp.hstack([a, eye, -eye], format="csr")
    c = np.concatenate([np.zeros(n), np.ones(2 * m)])
    res = milp(
        c,
        bounds=Bounds(np.concatenate([lb, np.zeros(2 * m)]), np.concatenate([ub, np.full(2 * m, INF)])),
        constraints=[LinearConstraint(big, lo, hi)],
    )
    if res.x is None:
        return ["variable_bounds"]
    slack = res.x[n : n + m] + res.x[n + m :]
    fam = model.family_of_rows()
    hit = sorted({str(f) for f in fam[slack > 1e-7]})
    return hit


def solve(
    model: LinearModel,
    mipgap: float = 0.01,
    time_limit: float | None = None,
    backend: SolverBackend | None = None,
    check_tol: float = 1e-6,
) -> SolveResult:
    """Solve, then re-check every row and bound outside the backend."""
    backend = backend or _DEFAULT_BACKEND
    result = backend.solve(model, mipgap, time_limit)
    if result.feasible:
        worst, _ = constraint_violation(model, result.x)
        result.max_violation = worst
        if worst > check_tol:
            logger.warning("%s: re-check violation %.3g exceeds %.1g", model.name, worst, check_tol)
    elif result.status == "infeasible":
        result.infeasible_families = infeasibility_hint(model)
        logger.info("%s infeasible; families involved: %s", model.name, result.infeasible_families)
    return result
