"""Graph Laplacian spectra, expansion constants, the variance inequality
behind the expander obstruction, and per-quotient Kazhdan-style gaps."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .spaces import FiniteMetricSpace, graph_metric
from .groups import FiniteGroup

EXACT_SUBSET_CAP = 20


def worker_count() -> int:
    """Parallelism cap from COARSELAB_THREADS (default 1, serial)."""
    raw = os.environ.get("COARSELAB_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"COARSELAB_THREADS must be an integer, got {raw!r}") from exc
    return max(1, value)


class RegularGraph:
    """Simple connected graph of constant degree, optionally generator-colored."""

    def __init__(self, adjacency, degree: int | None = None, require_connected: bool = True):
        self.adjacency = np.asarray(adjacency, dtype=int)
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency must be square")
        if np.any(self.adjacency != self.adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(self.adjacency) != 0):
            raise ValueError("no loops allowed")
        if not np.all((self.adjacency == 0) | (self.adjacency == 1)):
            raise ValueError("adjacency entries must be 0/1")
        degrees = self.adjacency.sum(axis=1)
        if degree is None:
            degree = int(degrees[0]) if n else 0
        if np.any(degrees != degree):
            raise ValueError("graph is not regular of the declared degree")
        self.degree = degree
        self.connected = _is_connected(self.adjacency)
        if require_connected and not self.connected:
            raise ValueError("graph is disconnected")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self):
        idx = np.argwhere(np.triu(self.adjacency, 1) == 1)
        return [(int(a), int(b)) for a, b in idx]

    def metric_space(self) -> FiniteMetricSpace:
        return graph_metric(self.adjacency)


def _is_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n == 0:
        return True
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in np.nonzero(adj[v])[0]:
            if not seen[w]:
                seen[w] = True
                stack.append(int(w))
    return bool(seen.all())


@dataclass
class SpectralReport:
    spectrum: np.ndarray
    lam: float
    eigenvector: np.ndarray


def laplacian_gap(g: RegularGraph) -> SpectralReport:
    """Exact symmetric eigensolve of D*I - A; lam is the second-smallest
    eigenvalue, with eigenvalue 0 carried by the constants."""
    if not g.connected:
        raise ValueError("graph is disconnected")
    lap = g.degree * np.eye(g.n) - g.adjacency
    vals, vecs = np.linalg.eigh(lap)
    return SpectralReport(spectrum=vals, lam=float(vals[1]), eigenvector=vecs[:, 1])


def poincare_check(g: RegularGraph, f) -> tuple:
    """Variance against edge-variation: sum (f-M)^2 <= (1/lam) sum_E (df)^2."""
    f = np.asarray(f, dtype=float)
    lam = laplacian_gap(g).lam
    mean = f.mean()
    lhs = float(((f - mean) ** 2).sum())
    edge_sum = sum((f[a] - f[b]) ** 2 for a, b in g.edges())
    rhs = float(edge_sum / lam)
    return lhs, rhs, lhs <= rhs + 1e-9


@dataclass
class ExpansionReport:
    c: float
    subset: list
    mode: str
    samples: int | None = None


def _neighbor_masks(adj: np.ndarray) -> list:
    n = adj.shape[0]
    masks = []
    for v in range(n):
        m = 0
        for w in np.nonzero(adj[v])[0]:
            m |= 1 << int(w)
        masks.append(m)
    return masks


def _subset_ratio(subset_mask: int, masks, n: int) -> float:
    nbr = 0
    m = subset_mask
    while m:
        v = (m & -m).bit_length() - 1
        nbr |= masks[v]
        m &= m - 1
    boundary = bin(nbr & ~subset_mask & ((1 << n) - 1)).count("1")
    a = bin(subset_mask).count("1")
    return boundary / ((1.0 - a / n) * a)


def expansion_constant(graph, mode: str = "exact", samples: int | None = None, seed: int = 0) -> ExpansionReport:
    """Worst-case |boundary(A)| / ((1-|A|/|V|)|A|) over nonempty proper A.

    Boundary is the outer vertex boundary.  Exact mode enumerates all
    subsets (|V| <= 20); sampled mode draws random subsets and only upper
    bounds the true constant (the minimizer may be missed), so its report
    carries the sample count rather than an exactness claim.
    """
    adj = graph.adjacency if isinstance(graph, RegularGraph) else np.asarray(graph, dtype=int)
    n = adj.shape[0]
    masks = _neighbor_masks(adj)
    if mode == "exact":
        if n > EXACT_SUBSET_CAP:
            raise ValueError(f"exact enumeration capped at {EXACT_SUBSET_CAP} vertices")
        full = (1 << n) - 1
        jobs = range(1, full)
        workers = worker_count()
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            chunks = np.array_split(np.arange(1, full), workers)

            def best_of(chunk):
                best, best_m = math.inf, 0
                for m in chunk:
                    r = _subset_ratio(int(m), masks, n)
                    if r < best:
                        best, best_m = r, int(m)
                return best, best_m

            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(best_of, chunks))
            best, best_mask = min(results)
        else:
            best, best_mask = math.inf, 0
            for m in jobs:
                r = _subset_ratio(m, masks, n)
                if r < best:
                    best, best_mask = r, m
        subset = [v for v in range(n) if best_mask >> v & 1]
        return ExpansionReport(c=best, subset=subset, mode="exact")
    if mode == "sampled":
        if not samples:
            raise ValueError("sampled mode needs a sample count")
        rng = np.random.default_rng(seed)
        best, best_mask = math.inf, 0
        for _ in range(samples):
            size = int(rng.integers(1, n))
            chosen = rng.choice(n, size=size, replace=False)
            mask = 0
            for v in chosen:
                mask |= 1 << int(v)
            r = _subset_ratio(mask, masks, n)
            if r < best:
                best, best_mask = r, mask
        subset = [v for v in range(n) if best_mask >> v & 1]
        return ExpansionReport(c=best, subset=subset, mode="sampled", samples=samples)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ConcentrationReport:
    lam: float
    c_edge: float
    radius_sq: float
    inside: int
    required: int
    passes: bool


def concentration_test(g: RegularGraph, coords, c_edge: float | None = None) -> ConcentrationReport:
    """Count vertices within the variance ball after centering.

    For an embedding whose edges move by at most c, at least half the
    vertices must land within sqrt(2 c^2 / lam) of the centroid.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    disp = max(float(np.linalg.norm(coords[a] - coords[b])) for a, b in g.edges())
    if c_edge is None:
        c_edge = disp
    elif disp > c_edge + 1e-12:
        raise ValueError(f"edge displacement {disp:.6g} exceeds the declared bound {c_edge:.6g}")
    lam = laplacian_gap(g).lam
    centered = coords - coords.mean(axis=0, keepdims=True)
    radius_sq = 2.0 * c_edge**2 / lam
    norms_sq = (centered**2).sum(axis=1)
    inside = int((norms_sq <= radius_sq + 1e-12).sum())
    required = math.ceil(g.n / 2)
    return ConcentrationReport(
        lam=lam,
        c_edge=c_edge,
        radius_sq=radius_sq,
        inside=inside,
        required=required,
        passes=inside >= required,
    )


@dataclass
class KazhdanReport:
    eps: float
    cert_lower: float
    exact: bool
    expansion_ok: bool | None
    worst_subset: list | None
    worst_margin: float | None
    lam: float


def _cayley_adjacency(group: FiniteGroup) -> np.ndarray:
    adj = np.zeros((group.n, group.n), dtype=int)
    for g in range(group.n):
        for s in group.generators:
            adj[g, group.mult(g, s)] = 1
    return adj


def kazhdan_gap(
    group: FiniteGroup,
    exact_threshold: int = 12,
    restarts: int = 50,
    seed: int = 0,
    check_expansion: bool = True,
) -> KazhdanReport:
    """Smallest worst-generator displacement over unit mean-zero functions.

    eps = min over mean-zero unit f of max over generators s of |sf - f|
    under the (right) translation action on the Cayley graph.  A certified
    lower bound sqrt(2 lam / |S|) comes from averaging the per-generator
    quadratic forms; the min-max itself is solved by constrained
    optimization with seeded restarts (exact claim only when the restarts
    agree).  The per-quotient expansion inequality
    |boundary(A)| >= (eps^2/2)(1 - |A|/m)|A| is then verified exhaustively
    for |V| <= 16.
    """
    n = group.n
    if n < 2:
        raise ValueError("group must have at least two elements")
    adj = _cayley_adjacency(group)
    graph = RegularGraph(adj, degree=len(group.generators))
    lam = laplacian_gap(graph).lam
    cert = math.sqrt(2.0 * lam / len(group.generators))

    # per-generator displacement forms on the mean-zero subspace
    basis = _meanzero_basis(n)
    forms = []
    for s in group.generators:
        perm = group.table[:, s]  # f -> f(. s)
        diff = np.eye(n)[perm] - np.eye(n)
        q = diff.T @ diff
        forms.append(basis.T @ q @ basis)

    best = math.inf
    values = []
    if n <= max(exact_threshold, 16):
        rng = np.random.default_rng(seed)
        dim = n - 1

        def objective(c):
            return max(float(c @ m @ c) for m in forms)

        starts = [rng.standard_normal(dim) for _ in range(restarts)]
        avg = sum(forms)
        vals, vecs = np.linalg.eigh(avg)
        starts.extend(vecs[:, i] for i in range(min(dim, 4)))
        # epigraph form keeps the problem smooth for SLSQP
        constraints = [{"type": "eq", "fun": lambda z: z[:-1] @ z[:-1] - 1.0}]
        for m in forms:
            constraints.append({"type": "ineq", "fun": (lambda m: lambda z: z[-1] - z[:-1] @ m @ z[:-1])(m)})
        for x0 in starts:
            x0 = x0 / np.linalg.norm(x0)
            z0 = np.append(x0, objective(x0))
            res = minimize(
                lambda z: z[-1],
                z0,
                method="SLSQP",
                constraints=constraints,
                options={"maxiter": 400, "ftol": 1e-14},
            )
            c = res.x[:-1]
            norm = np.linalg.norm(c)
            if res.success and norm > 1e-9 and abs(norm - 1.0) < 1e-6:
                values.append(objective(c / norm))
        if values:
            best = min(values)
    if math.isinf(best):
        eps = cert
        exact = False
    else:
        eps = math.sqrt(max(best, 0.0))
        eps = max(eps, cert)  # the certificate is a true lower bound
        close = [v for v in values if v <= best + 1e-7]
        exact = len(close) >= 2 or abs(eps - cert) < 1e-6

    expansion_ok = None
    worst_subset = None
    worst_margin = None
    if check_expansion and n <= 16:
        masks = _neighbor_masks(adj)
        expansion_ok = True
        worst_margin = math.inf
        for m in range(1, (1 << n) - 1):
            a = bin(m).count("1")
            nbr = 0
            mm = m
            while mm:
                v = (mm & -mm).bit_length() - 1
                nbr |= masks[v]
                mm &= mm - 1
            boundary = bin(nbr & ~m & ((1 << n) - 1)).count("1")
            needed = (eps**2 / 2.0) * (1.0 - a / n) * a
            margin = boundary - needed
            if margin < worst_margin:
                worst_margin = margin
                worst_subset = [v for v in range(n) if m >> v & 1]
            if boundary + 1e-9 < needed:
                expansion_ok = False
    return KazhdanReport(
        eps=eps,
        cert_lower=cert,
        exact=exact,
        expansion_ok=expansion_ok,
        worst_subset=worst_subset,
        worst_margin=worst_margin,
        lam=lam,
    )


def _meanzero_basis(n: int) -> np.ndarray:
    """Helmert basis of the mean-zero subspace (n x (n-1)), deterministic."""
    basis = np.zeros((n, n - 1))
    for k in range(1, n):
        basis[:k, k - 1] = 1.0
        basis[k, k - 1] = -float(k)
        basis[:, k - 1] /= math.sqrt(k * (k + 1))
    return basis


def random_regular_graph(n: int, d: int, seed: int = 0, max_tries: int = 10000) -> RegularGraph:
    """Uniform pairing-model d-regular graph, resampled until simple and
    connected; deterministic for a given seed."""
    if (n * d) % 2 != 0:
        raise ValueError("n*d must be even")
    if not 0 < d < n:
        raise ValueError("need 0 < d < n")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        adj = np.zeros((n, n), dtype=int)
        simple = True
        for a, b in zip(stubs[0::2], stubs[1::2]):
            if a == b or adj[a, b]:
                simple = False
                break
            adj[a, b] = adj[b, a] = 1
        if simple and _is_connected(adj):
            return RegularGraph(adj, degree=d)
    raise RuntimeError("failed to sample a simple connected regular graph")
