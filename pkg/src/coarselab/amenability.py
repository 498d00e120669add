"""Reiter functions, LP-optimal averaging functions, and the support-radius
quantification of certificate quality on groups and spaces.

Two quantities are tabulated: the minimal support radius S at which some
probability function on a group keeps all translation defects below eps at
scale R (the averaging side), and the minimal S at which a per-point family
of unit l^1 functions with supports in S-balls varies by less than eps
across R-close pairs (the certificate side).  On finite groups the two
agree; the tables here compute both by independent linear programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exactlp import minimize_lp, LPError
from .groups import FiniteGroup, cayley_metric, group_power
from .spaces import FiniteMetricSpace, _scaled_tol
from .witnesses import LpWitness
from .kernels import classify_kernel

EXACT_GROUP_CAP = 16


@dataclass
class FolnerFunction:
    """Probability table over a group with its support radius."""

    group: FiniteGroup
    values: object  # list of Fractions (exact) or float ndarray
    S: float = field(init=False)

    def __post_init__(self):
        vals = list(self.values)
        if len(vals) != self.group.n:
            raise ValueError("need one value per group element")
        total = sum(vals)
        if abs(float(total) - 1.0) > 1e-9:
            raise ValueError("values must sum to one")
        if any(float(v) < -1e-12 for v in vals):
            raise ValueError("values must be nonnegative")
        supp = [g for g, v in enumerate(vals) if float(v) > 1e-12]
        self.S = float(max(self.group.lengths[g] for g in supp)) if supp else 0.0
        self.values = vals

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


def reiter_defect(group: FiniteGroup, f, R: float):
    """max over nontrivial |g| <= R of the l^1 translation defect |gf - f|,
    with (gf)(h) = f(g^-1 h).  Exact over Fractions when given Fractions."""
    values = f.values if isinstance(f, FolnerFunction) else list(f)
    moved = {}
    worst = 0
    for g in range(group.n):
        if g == group.identity or group.lengths[g] > R + 1e-9:
            continue
        gi = group.inverse[g]
        defect = sum(
            abs(values[group.mult(gi, h)] - values[h]) for h in range(group.n)
        )
        moved[g] = defect
        if defect > worst:
            worst = defect
    return worst


def optimal_folner(group: FiniteGroup, R: float, S: float, exact: bool | None = None):
    """LP-minimal worst translation defect among probability functions
    supported in the closed S-ball; returns (FolnerFunction, defect).

    The l^1 terms are linearized through positive parts (both sides are
    probability vectors, so |gf - f| = 2 * sum of positive parts).
    """
    if exact is None:
        exact = group.n <= EXACT_GROUP_CAP
    ball = group.ball(S)
    if not ball:
        raise ValueError("empty support ball")
    movers = [g for g in range(group.n) if g != group.identity and group.lengths[g] <= R + 1e-9]
    fpos = {h: i for i, h in enumerate(ball)}
    nf = len(ball)
    vstart = nf  # then one slab of v-vars per mover
    vindex = {}
    col = vstart
    for g in movers:
        gball = sorted({group.mult(g, h) for h in ball} | set(ball))
        for h in gball:
            vindex[(g, h)] = col
            col += 1
    tcol = col
    ncols = col + 1
    a_ub, b_ub = [], []
    for g in movers:
        gi = group.inverse[g]
        total = [0] * ncols
        for (gg, h), j in vindex.items():
            if gg != g:
                continue
            row = [0] * ncols
            # (gf - f)(h) - v_{g,h} <= 0
            src = group.mult(gi, h)
            if src in fpos:
                row[fpos[src]] += 1
            if h in fpos:
                row[fpos[h]] -= 1
            row[j] = -1
            a_ub.append(row)
            b_ub.append(0)
            total[j] = 2
        total[tcol] = -1
        a_ub.append(total)
        b_ub.append(0)
    a_eq = [[1] * nf + [0] * (ncols - nf)]
    b_eq = [1]
    c = [0] * tcol + [1]
    try:
        x, value = minimize_lp(c, a_ub, b_ub, a_eq, b_eq, exact=exact)
    except LPError as exc:
        raise LPError(f"Folner LP failed (signals a solver fault): {exc}") from exc
    if exact:
        values = [Fraction(0)] * group.n
        for h, i in fpos.items():
            values[h] = x[i]
        defect = value
    else:
        values = np.zeros(group.n)
        for h, i in fpos.items():
            values[h] = max(float(x[i]), 0.0)
        values /= values.sum()
        defect = float(value)
    return FolnerFunction(group=group, values=values), defect


def witness_feasibility(space: FiniteMetricSpace, R: float, S: float, exact: bool = False):
    """Joint LP over all per-point functions: minimize the worst pair defect
    among unit l^1 families supported in S-balls; returns (table, defect).

    This is the certificate-side optimum, solved without any group
    structure; on Cayley spaces it is deliberately independent of the
    averaging LP.
    """
    n = space.n
    tol = _scaled_tol(space.dist)
    balls = [np.nonzero(space.dist[x] <= S + tol)[0].tolist() for x in range(n)]
    fpos = {}
    col = 0
    for x in range(n):
        for y in balls[x]:
            fpos[(x, y)] = col
            col += 1
    pairs = [(x, y) for x in range(n) for y in range(x + 1, n) if space.dist[x, y] <= R + tol]
    vindex = {}
    for pair in pairs:
        x, y = pair
        union = sorted(set(balls[x]) | set(balls[y]))
        for z in union:
            vindex[(pair, z)] = col
            col += 1
    tcol = col
    ncols = col + 1
    a_ub, b_ub = [], []
    for pair in pairs:
        x, y = pair
        total = [0] * ncols
        union = sorted(set(balls[x]) | set(balls[y]))
        for z in union:
            row = [0] * ncols
            if (x, z) in fpos:
                row[fpos[(x, z)]] += 1
            if (y, z) in fpos:
                row[fpos[(y, z)]] -= 1
            row[vindex[(pair, z)]] = -1
            a_ub.append(row)
            b_ub.append(0)
            total[vindex[(pair, z)]] = 2
        total[tcol] = -1
        a_ub.append(total)
        b_ub.append(0)
    a_eq, b_eq = [], []
    for x in range(n):
        row = [0] * ncols
        for y in balls[x]:
            row[fpos[(x, y)]] = 1
        a_eq.append(row)
        b_eq.append(1)
    c = [0] * tcol + [1]
    x_opt, value = minimize_lp(c, a_ub, b_ub, a_eq, b_eq, exact=exact)
    table = np.zeros((n, n))
    for (xx, yy), i in fpos.items():
        table[xx, yy] = max(float(x_opt[i]), 0.0)
    table /= table.sum(axis=1, keepdims=True)
    return table, (value if exact else float(value))


@dataclass
class DiamTable:
    """Minimal admissible support radii per (R, eps), with LP certificates.

    ``defects[(R, eps, S)]`` records the optimal defect found while scanning.
    Certificate-side optima range over nonnegative families only (signed
    optima could at most match them in S).
    """

    target: str
    form: str  # "folner" or "witness"
    entries: dict = field(default_factory=dict)
    defects: dict = field(default_factory=dict)

    def monotone(self) -> bool:
        ok = True
        rs = sorted({r for r, _ in self.entries})
        es = sorted({e for _, e in self.entries})
        for e in es:
            vals = [self.entries[(r, e)] for r in rs if (r, e) in self.entries]
            ok &= all(a <= b for a, b in zip(vals, vals[1:]))
        for r in rs:
            vals = [self.entries[(r, e)] for e in sorted(es, reverse=True) if (r, e) in self.entries]
            ok &= all(a <= b for a, b in zip(vals, vals[1:]))
        return ok


def _defect_below(defect, eps, exact: bool) -> bool:
    if exact and isinstance(defect, Fraction):
        return defect < Fraction(eps).limit_denominator(10**6)
    return float(defect) < eps - 1e-9


def diam_table(target, R_grid, eps_grid, form: str, exact: bool | None = None) -> DiamTable:
    """Scan S upward until the optimal defect drops below eps, per grid cell.

    ``form='folner'`` needs a FiniteGroup (averaging LP); ``form='witness'``
    accepts a group (its word metric space is used) or a space, and solves
    the joint per-point LP.  Radii are scanned over the attained distance
    values, so entries are exact integers on word metrics.
    """
    if form == "folner":
        if not isinstance(target, FiniteGroup):
            raise ValueError("folner form needs a finite group")
        group = target
        if exact is None:
            exact = group.n <= EXACT_GROUP_CAP
        radii = sorted(set(float(v) for v in group.lengths))
        table = DiamTable(target=repr(group), form="folner")
        for R in R_grid:
            for eps in eps_grid:
                found = None
                for S in radii:
                    _f, defect = optimal_folner(group, R, S, exact=exact)
                    table.defects[(R, eps, S)] = defect
                    if _defect_below(defect, eps, exact):
                        found = S
                        break
                if found is None:
                    raise LPError("no admissible S up to the diameter (signals a bug)")
                table.entries[(R, eps)] = found
        return table
    if form == "witness":
        space = cayley_metric(target) if isinstance(target, FiniteGroup) else target
        if exact is None:
            exact = space.n <= 8
        radii = sorted(set(float(v) for v in np.unique(space.dist)))
        table = DiamTable(target=repr(space), form="witness")
        for R in R_grid:
            for eps in eps_grid:
                found = None
                for S in radii:
                    _t, defect = witness_feasibility(space, R, S, exact=exact)
                    table.defects[(R, eps, S)] = defect
                    if _defect_below(defect, eps, exact):
                        found = S
                        break
                if found is None:
                    raise LPError("no admissible S up to the diameter (signals a bug)")
                table.entries[(R, eps)] = found
        return table
    raise ValueError(f"unknown diam form {form!r}")


def folner_to_witness(group: FiniteGroup, f: FolnerFunction) -> LpWitness:
    """Translate family xi_g = gf; its variation at scale R equals the
    Reiter defect at R by left-invariance."""
    vals = f.as_floats()
    table = np.zeros((group.n, group.n))
    for g in range(group.n):
        gi = group.inverse[g]
        for h in range(group.n):
            table[g, h] = vals[group.mult(gi, h)]
    space = cayley_metric(group)
    return LpWitness(p=1, table=table, point_ids=tuple(space.points), S=f.S)


def witness_to_folner(group: FiniteGroup, w: LpWitness) -> FolnerFunction:
    """Uniform average f(h) = mean_g xi_g(g h); the finite-group invariant
    mean, so the defect is at most the worst witness variation."""
    if abs(w.p - 1.0) > 1e-12:
        raise ValueError("averaging needs an l^1 witness")
    n = group.n
    values = np.zeros(n)
    for h in range(n):
        values[h] = np.mean([w.table[g, group.mult(g, h)] for g in range(n)])
    return FolnerFunction(group=group, values=values)


def folner_witness_bridge(direction: str, group: FiniteGroup, data):
    if direction == "to_witness":
        return folner_to_witness(group, data)
    if direction == "to_folner":
        return witness_to_folner(group, data)
    raise ValueError(f"unknown bridge direction {direction!r}")


def kernel_to_function(group: FiniteGroup, kernel) -> np.ndarray:
    """Average a positive-type kernel into a positive-type function:
    phi(h) = mean_g k(h^-1 g, g); normalization, variation and propagation
    carry over."""
    mat = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    if mat.shape != (group.n, group.n):
        raise ValueError("kernel must be indexed by the group elements")
    if not classify_kernel(mat).positive_type:
        raise ValueError("kernel is not of positive type")
    phi = np.empty(group.n)
    for h in range(group.n):
        hi = group.inverse[h]
        phi[h] = np.mean([mat[group.mult(hi, g), g] for g in range(group.n)])
    return phi


def growth_experiment(base: FiniteGroup, eps: float, n_range, budget: int = EXACT_GROUP_CAP) -> dict:
    """diam^F of the direct powers at scale 1: the finite-n shadow of the
    divergence of support radii along powers; asymptotics are not claimed.

    Powers whose order exceeds ``budget`` are skipped and flagged, so the
    table may be explicitly partial.
    """
    out = {"eps": eps, "rows": [], "truncated_at": None}
    for n in n_range:
        power = group_power(base, n)
        if power.n > budget:
            out["truncated_at"] = n
            break
        table = diam_table(power, [1], [eps], form="folner")
        out["rows"].append((n, table.entries[(1, eps)], table.defects))
    values = [s for _n, s, _d in out["rows"]]
    out["nondecreasing"] = all(a <= b for a, b in zip(values, values[1:]))
    return out
