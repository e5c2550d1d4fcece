"""Correlation networks and minimal spanning tree structure.

Assets are vertices; the distance between two assets is
``sqrt(2 (1 - rho))`` of their log-return correlation. Trees are built by
Prim's or Kruskal's algorithm with ties broken on (weight, i, j).
"""
from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import CatewsError, InputError, InsufficientDataError, InsufficientStructureError, ParseError
from .timeseries import WindowSpec


@dataclass(frozen=True)
class Panel:
    """Prices of several assets on common dates; ``prices`` is (T, N)."""

    prices: np.ndarray
    labels: tuple
    dates: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.prices, dtype=float)
        if p.ndim != 2 or p.shape[1] != len(self.labels):
            raise InputError("prices must be (T, N) with one label per column")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise InputError("prices must be finite and positive")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(self.prices), axis=0)

    @classmethod
    def from_returns(cls, returns, labels=None, p0=100.0) -> "Panel":
        r = np.asarray(returns, dtype=float)
        labels = labels or [f"A{i}" for i in range(r.shape[1])]
        logp = np.vstack([np.zeros(r.shape[1]), np.cumsum(r, axis=0)])
        return cls(p0 * np.exp(logp), tuple(labels))

    @classmethod
    def from_csv(cls, path, date_column: str | None = None) -> "Panel":
        """Date column plus one price column per asset; every cell must be a positive number."""
        path = Path(path)
        if not path.exists():
            raise InputError(f"input not found: {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise InsufficientDataError(f"{path} is empty") from None
            date_column = date_column or ("date" if "date" in header else header[0])
            if date_column not in header:
                raise ParseError(f"date column {date_column!r} not in header", line=1)
            di = header.index(date_column)
            assets = [h for i, h in enumerate(header) if i != di]
            dates, rows = [], []
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
                try:
                    dates.append(np.datetime64(dt.date.fromisoformat(row[di].strip()), "D"))
                except ValueError:
                    raise ParseError(f"bad ISO-8601 date {row[di]!r}", line=line) from None
                vals = []
                for i, cell in enumerate(row):
                    if i == di:
                        continue
                    try:
                        v = float(cell)
                    except ValueError:
                        v = math.nan
                    if not (math.isfinite(v) and v > 0):
                        raise ParseError(f"invalid value {cell.strip()!r} in column {header[i]!r}", line=line)
                    vals.append(v)
                rows.append(vals)
        if len(rows) < 2:
            raise InsufficientDataError(f"{path}: fewer than 2 rows")
        dates = np.array(dates, dtype="datetime64[D]")
        order = np.argsort(dates, kind="stable")
        if np.any(np.diff(dates[order]).astype(np.int64) == 0):
            raise InputError(f"{path}: duplicate dates")
        return cls(np.array(rows)[order], tuple(assets), dates[order])


@dataclass(frozen=True)
class CorrelationWindow:
    labels: tuple
    rho: np.ndarray
    span: tuple = (0, 0)
    excluded: tuple = ()

    def __post_init__(self):
        r = np.array(self.rho, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] != len(self.labels):
            raise InputError("rho must be square with one label per row")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12) or not np.allclose(np.diag(r), 1.0, atol=1e-12):
            raise InputError("rho must be symmetric with unit diagonal")
        if np.any(np.abs(r) > 1 + 1e-12):
            raise InputError("correlations must lie in [-1, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def distances(self) -> np.ndarray:
        return correlation_distance(self.rho)


def correlation_distance(rho) -> np.ndarray:
    d = np.sqrt(np.clip(2.0 * (1.0 - np.asarray(rho, dtype=float)), 0.0, None))
    np.fill_diagonal(d, 0.0)
    return d


def correlation_from_returns(returns, labels=None, span=(0, 0)) -> CorrelationWindow:
    """Pearson correlation of the columns of ``returns``; constant columns are dropped with a warning."""
    r = np.asarray(returns, dtype=float)
    labels = tuple(labels) if labels is not None else tuple(f"A{i}" for i in range(r.shape[1]))
    if r.shape[0] < 3:
        raise InsufficientDataError("correlation needs at least 3 returns per asset")
    keep = np.ptp(r, axis=0) > 0
    excluded = tuple(lab for lab, k in zip(labels, keep) if not k)
    if excluded:
        warnings.warn(f"excluded zero-variance assets: {', '.join(excluded)}")
    r = r[:, keep]
    labels = tuple(lab for lab, k in zip(labels, keep) if k)
    if len(labels) < 2:
        raise InsufficientDataError("fewer than 2 assets with varying returns")
    z = r - r.mean(axis=0)
    z /= np.sqrt((z * z).sum(axis=0))
    rho = np.clip(z.T @ z, -1.0, 1.0)
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    return CorrelationWindow(labels, rho, span, excluded)


def correlation_window(panel: Panel, span=None) -> CorrelationWindow:
    """Correlation of log-returns between price rows ``span = (start, end)`` (end exclusive)."""
    if len(panel.labels) < 2:
        raise InsufficientDataError("need at least 2 assets")
    start, end = span if span is not None else (0, len(panel.prices))
    r = np.diff(np.log(panel.prices[start:end]), axis=0)
    return correlation_from_returns(r, panel.labels, (start, end))


def _check_distances(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InputError("distance matrix must be square")
    bad = np.argwhere(~np.isfinite(d))
    if len(bad):
        i, j = bad[0]
        raise InputError(f"non-finite distance between vertices {i} and {j}")
    return d


def mst_prim(d) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense distance matrix; returns edges (i, j, w) with i < j."""
    d = _check_distances(d)
    n = len(d)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].copy()
    parent = np.zeros(n, dtype=int)
    edges = []
    idx = np.arange(n)
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        w = cand.min()
        ties = np.nonzero(cand == w)[0]
        if len(ties) > 1:
            keys = [(min(parent[v], v), max(parent[v], v)) for v in ties]
            v = int(ties[min(range(len(ties)), key=keys.__getitem__)])
        else:
            v = int(ties[0])
        u = int(parent[v])
        edges.append((min(u, v), max(u, v), float(d[u, v])))
        in_tree[v] = True
        row = d[v]
        lo_new, hi_new = np.minimum(idx, v), np.maximum(idx, v)
        lo_old, hi_old = np.minimum(idx, parent), np.maximum(idx, parent)
        better = (row < best) | ((row == best) & ((lo_new < lo_old) | ((lo_new == lo_old) & (hi_new < hi_old))))
        better &= ~in_tree
        best = np.where(better, row, best)
        parent = np.where(better, v, parent)
    return sorted(edges, key=lambda e: (e[0], e[1]))


def mst_kruskal(d) -> list[tuple[int, int, float]]:
    """Kruskal's algorithm with union-find over edges sorted by (weight, i, j)."""
    d = _check_distances(d)
    n = len(d)
    iu, ju = np.triu_indices(n, 1)
    w = d[iu, ju]
    order = np.lexsort((ju, iu, w))
    root = list(range(n))

    def find(a):
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    edges = []
    for k in order:
        a, b = find(int(iu[k])), find(int(ju[k]))
        if a != b:
            root[max(a, b)] = min(a, b)
            edges.append((int(iu[k]), int(ju[k]), float(w[k])))
            if len(edges) == n - 1:
                break
    return sorted(edges, key=lambda e: (e[0], e[1]))


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for i, j, _ in edges:
        adj[i].append(j)
        adj[j].append(i)
    return adj


def hop_distances(n, edges, source) -> np.ndarray:
    adj = _adjacency(n, edges)
    dist = np.full(n, -1, dtype=int)
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _pairwise_hops_total(n, edges) -> int:
    """Sum of hop distances over all vertex pairs: each edge separates size * (n - size) pairs."""
    if n < 2:
        return 0
    adj = _adjacency(n, edges)
    parent = [-1] * n
    order = [0]
    parent[0] = 0
    for u in order:
        for v in adj[u]:
            if parent[v] < 0:
                parent[v] = u
                order.append(v)
    size = [1] * n
    total = 0
    for u in reversed(order[1:]):
        size[parent[u]] += size[u]
        total += size[u] * (n - size[u])
    return total


@dataclass
class MstSnapshot:
    labels: tuple
    edges: list
    degrees: np.ndarray
    center_static: int
    center_dynamic: int
    normalized_length: float
    center_weight_ratio: float
    mol_static: float
    mol_dynamic: float
    total_weight: float
    span: tuple = (0, 0)

    @property
    def n(self) -> int:
        return len(self.labels)


def mean_occupation_layer(tree: MstSnapshot, center) -> float:
    """Mean hop distance of all vertices to ``center`` (``"dynamic"``, ``"static"`` or a vertex index)."""
    if center == "dynamic":
        center = tree.center_dynamic
    elif center == "static":
        center = tree.center_static
    if not 0 <= int(center) < tree.n:
        raise InputError(f"center {center} not in tree")
    return float(hop_distances(tree.n, tree.edges, int(center)).mean())


def mst_build(cw, algorithm: str = "prim", center_static: int = 0, span=None) -> MstSnapshot:
    """MST of a correlation window (or of a raw distance matrix) with its structure metrics.

    ``normalized_length`` is the mean pairwise hop count of the tree divided
    by its value for a star on the same vertices, so a star gives exactly 1
    and any other tree more. ``center_weight_ratio`` is the mean tree edge
    weight over the mean distance from the dynamic center to all others.
    """
    if isinstance(cw, CorrelationWindow):
        d, labels, span = cw.distances, cw.labels, cw.span if span is None else span
    else:
        d = _check_distances(cw)
        labels = tuple(range(len(d)))
    n = len(d)
    if n < 2:
        raise InsufficientDataError("MST needs at least 2 vertices")
    if algorithm == "prim":
        edges = mst_prim(d)
    elif algorithm == "kruskal":
        edges = mst_kruskal(d)
    else:
        raise InputError(f"unknown algorithm {algorithm!r}")
    deg = np.zeros(n, dtype=int)
    for i, j, _ in edges:
        deg[i] += 1
        deg[j] += 1
    center = int(np.argmax(deg))
    total = float(sum(e[2] for e in edges))
    nl = _pairwise_hops_total(n, edges) / (n - 1) ** 2
    others = np.delete(d[center], center)
    ratio = (total / (n - 1)) / others.mean() if others.mean() > 0 else math.nan
    static = int(center_static)
    if not 0 <= static < n:
        raise InputError(f"static center {static} not in tree")
    snap = MstSnapshot(labels, edges, deg, static, center, float(nl), float(ratio), 0.0, 0.0, total,
                       tuple(span) if span is not None else (0, 0))
    snap.mol_static = mean_occupation_layer(snap, static)
    snap.mol_dynamic = mean_occupation_layer(snap, center)
    return snap


@dataclass
class DegreeFit:
    exponent: float
    se: float
    intercept: float
    outliers: list = field(default_factory=list)
    bin_centers: np.ndarray | None = None
    density: np.ndarray | None = None


def _degree_bins(kmax, n_bins):
    return np.unique(np.round(np.geomspace(1, kmax + 1, n_bins)).astype(int))


def _expected_rank_degree(ranks, slope, intercept, kmax):
    """Degree at which the fitted law predicts ``rank`` vertices of at least that degree."""
    ks = np.arange(1, kmax + 1, dtype=float)
    tail = np.cumsum((math.exp(intercept) * ks**slope)[::-1])[::-1]
    out = []
    for r in ranks:
        hit = np.nonzero(tail >= r)[0]
        out.append(ks[hit[-1]] if len(hit) else 1.0)
    return np.array(out)


def _fit_degree_law(d, n_bins):
    edges = _degree_bins(int(d.max()), n_bins)
    counts, _ = np.histogram(d, bins=edges)
    keep = counts > 0
    if keep.sum() < 2:
        raise InsufficientStructureError("too few occupied degree bins")
    x = np.sqrt(edges[1:] * edges[:-1])[keep]
    y = counts[keep] / np.diff(edges)[keep]
    return stats.linregress(np.log(x), np.log(y)), x, y


def degree_fit(tree, n_bins: int = 15, outlier_factor: float = 5.0, max_outliers: int = 10) -> DegreeFit:
    """Power-law slope of the degree density on log-spaced bins, plus superhub outliers.

    Counts in each bin are divided by its width; empty bins are dropped.
    Vertices are screened from the largest degree down: each is judged
    against the law fitted without it (and without outliers already found),
    and is an outlier when its degree is at least ``outlier_factor`` times
    the degree that law, cut off at the largest remaining degree, assigns to
    its rank. Screening stops at the first vertex that passes.
    """
    deg = np.asarray(tree.degrees if isinstance(tree, MstSnapshot) else tree, dtype=int)
    if len(np.unique(deg[deg >= 1])) < 4:
        raise InsufficientStructureError("degree fit needs at least 4 distinct degree values")
    order = np.argsort(-deg, kind="stable")
    use = deg >= 1
    outliers: list[int] = []
    for rank, v in enumerate(order[:max_outliers], start=1):
        use[v] = False
        try:
            reg, _, _ = _fit_degree_law(deg[use], n_bins)
        except InsufficientStructureError:
            use[v] = True
            break
        # the law is trusted only over the degree range it was fitted on
        expected = _expected_rank_degree([rank], reg.slope, reg.intercept, int(deg[use].max()))[0]
        if deg[v] < outlier_factor * expected:
            use[v] = True
            break
        outliers.append(int(v))
    reg, x, y = _fit_degree_law(deg[use], n_bins)
    se = float(reg.stderr) if np.isfinite(reg.stderr) else math.nan
    return DegreeFit(float(reg.slope), se, float(reg.intercept), sorted(outliers), x, y)


@dataclass
class TimelineRow:
    index: int
    start: int
    end: int
    normalized_length: float | None = None
    mol_static: float | None = None
    mol_dynamic: float | None = None
    max_degree: int | None = None
    exponent: float | None = None
    center_dynamic: int | None = None
    error: str | None = None
    snapshot: MstSnapshot | None = None

    CSV_COLUMNS = ("index", "start", "end", "normalized_length", "mol_static", "mol_dynamic", "max_degree",
                   "exponent", "center_dynamic", "error")

    def row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def structure_timeline(panel: Panel, spec: WindowSpec, center_static: int | None = None,
                       algorithm: str = "prim") -> list[TimelineRow]:
    """MST metrics over rolling windows of log-returns (``spec`` counts returns).

    The static center defaults to the max-degree vertex of the whole-sample tree.
    """
    r = panel.log_returns
    if spec.width > len(r):
        raise InsufficientDataError(f"window width {spec.width} exceeds {len(r)} returns")
    if center_static is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            center_static = mst_build(correlation_from_returns(r, panel.labels)).center_dynamic
    rows = []
    for k in range(spec.count(len(r))):
        s, e = k * spec.step, k * spec.step + spec.width
        row = TimelineRow(k, s, e)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cw = correlation_from_returns(r[s:e], panel.labels, (s, e))
            if cw.excluded:
                raise InsufficientDataError(f"zero-variance assets in window: {', '.join(cw.excluded)}")
            snap = mst_build(cw, algorithm, center_static)
            row.snapshot = snap
            row.normalized_length = snap.normalized_length
            row.mol_static = snap.mol_static
            row.mol_dynamic = snap.mol_dynamic
            row.max_degree = int(snap.degrees.max())
            row.center_dynamic = snap.center_dynamic
            try:
                row.exponent = degree_fit(snap).exponent
            except InsufficientStructureError:
                pass
        except CatewsError as exc:
            row.error = str(exc)
        rows.append(row)
    return rows


def timeline_minima(rows) -> dict:
    """Window index of the smallest normalized length and mean occupation layers."""
    out = {}
    for key in ("normalized_length", "mol_static", "mol_dynamic"):
        vals = [(getattr(r, key), r.index) for r in rows if getattr(r, key) is not None]
        out[key] = min(vals)[1] if vals else None
    return out
