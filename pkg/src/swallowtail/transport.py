"""Parallel transport of transseries data across the Stokes graph.

The transseries parameters sigma_i are carried as exact integer linear
forms over base symbols beta_1..beta_n and the Stokes constants S_ij as
an exact integer matrix.  Crossing an ordinary line l_{i>j} applies
sigma_j += S_ij sigma_i; crossing a higher-order line h_{i>k;j} applies
S_ik += S_ij S_jk.  All signs come from the traced geometry (the sign
of the Im[.] change along the query path), never from tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from shapely import LineString, Point

from . import singulants as sg
from . import tracing as tr
from .errors import PathTooCloseToCrossing, Unroutable

__all__ = [
    "StokesMatrix",
    "SigmaVector",
    "ConnectionState",
    "REFERENCE_STOKES",
    "base_state",
    "stokes_automorphism_matrix",
    "apply_stokes",
    "apply_higher",
    "transport",
    "classify",
    "region_tables",
    "INDEPENDENT_PAIRS",
]

# the six independent entries for n = 4 (the rest by antisymmetry)
INDEPENDENT_PAIRS = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]


class StokesMatrix:
    """Exact integer matrix of Stokes constants with zero diagonal."""

    def __init__(self, n=4, entries=None, antisymmetric=True):
        self.n = n
        self.antisymmetric = antisymmetric
        if entries is None:
            self.m = [[0] * n for _ in range(n)]
        else:
            self.m = [[int(v) for v in row] for row in entries]
            if len(self.m) != n or any(len(r) != n for r in self.m):
                raise ValueError("entries must be n x n")
        self._check()

    def _check(self):
        for i in range(self.n):
            if self.m[i][i] != 0:
                raise ValueError("nonzero diagonal in Stokes matrix")
        if self.antisymmetric:
            for i in range(self.n):
                for j in range(self.n):
                    if self.m[i][j] != -self.m[j][i]:
                        raise ValueError("antisymmetry violated")

    def get(self, i, j):
        return self.m[i - 1][j - 1]

    def copy(self):
        return StokesMatrix(self.n, self.m, self.antisymmetric)

    def independent_entries(self):
        return {(i, j): self.get(i, j) for i, j in INDEPENDENT_PAIRS}

    def __eq__(self, other):
        return (
            isinstance(other, StokesMatrix)
            and self.n == other.n
            and self.m == other.m
        )

    def __repr__(self):
        return f"StokesMatrix({self.n}, {self.m})"


class SigmaVector:
    """n transseries parameters as integer linear forms over beta."""

    def __init__(self, n=4, coeffs=None):
        self.n = n
        if coeffs is None:
            # sigma_i = beta_i
            self.coeffs = [
                [1 if c == r else 0 for c in range(n)] for r in range(n)
            ]
        else:
            self.coeffs = [[int(v) for v in row] for row in coeffs]

    def copy(self):
        return SigmaVector(self.n, self.coeffs)

    def instantiate(self, beta):
        beta = np.asarray(beta)
        return np.array(
            [sum(c * b for c, b in zip(row, beta)) for row in self.coeffs]
        )

    def form(self, i):
        return tuple(self.coeffs[i - 1])

    def __eq__(self, other):
        return (
            isinstance(other, SigmaVector)
            and self.n == other.n
            and self.coeffs == other.coeffs
        )

    def __repr__(self):
        names = [f"b{k+1}" for k in range(self.n)]

        def fmt(row):
            parts = []
            for c, nm in zip(row, names):
                if c == 0:
                    continue
                sgn = "+" if c > 0 else "-"
                mag = "" if abs(c) == 1 else str(abs(c))
                parts.append(f"{sgn}{mag}{nm}")
            return "".join(parts).lstrip("+") or "0"

        return "SigmaVector(" + ", ".join(fmt(r) for r in self.coeffs) + ")"


@dataclass
class ConnectionState:
    at: complex
    sigma: SigmaVector
    stokes: StokesMatrix
    log: list = field(default_factory=list)

    def copy(self):
        return ConnectionState(
            self.at, self.sigma.copy(), self.stokes.copy(), list(self.log)
        )

    def replay(self, base):
        """Re-apply this state's log to a base state; must reproduce
        (sigma, stokes) exactly."""
        cur = base.copy()
        for rec in self.log:
            if rec["kind"] == "ordinary":
                i, j = rec["labels"]
                cur = apply_stokes(cur, i, j, rec["direction"])
            else:
                i, k, j = rec["labels"]
                cur = apply_higher(cur, i, k, j, rec["direction"])
        return cur


# Stokes constants at the reference point z* (base region)
REFERENCE_STOKES = StokesMatrix(
    4,
    [
        [0, -1, 0, 0],
        [1, 0, 0, -1],
        [0, 0, 0, 1],
        [0, 1, -1, 0],
    ],
)


def base_state() -> ConnectionState:
    """Canonical state at z*: sigma = (b1, b2, b3, b4), reference S."""
    return ConnectionState(
        sg.REFERENCE_POINT, SigmaVector(4), REFERENCE_STOKES.copy(), []
    )


def stokes_automorphism_matrix(S: StokesMatrix, i, j):
    """Matrix of the automorphism for l_{i>j}: identity plus S_ij at
    row j, column i."""
    if i == j:
        raise IndexError("i and j must differ")
    n = S.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError("label out of range")
    m = np.eye(n, dtype=int)
    m[j - 1, i - 1] = S.get(i, j)
    return m


def apply_stokes(state: ConnectionState, i, j, direction) -> ConnectionState:
    """Cross l_{i>j}: sigma_j += direction * S_ij * sigma_i."""
    if i == j:
        raise IndexError("i and j must differ")
    n = state.sigma.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError("label out of range")
    out = state.copy()
    s = state.stokes.get(i, j) * int(direction)
    row_i = out.sigma.coeffs[i - 1]
    row_j = out.sigma.coeffs[j - 1]
    out.sigma.coeffs[j - 1] = [a + s * b for a, b in zip(row_j, row_i)]
    out.log.append(
        {"kind": "ordinary", "labels": (i, j), "direction": int(direction)}
    )
    return out


def apply_higher(state: ConnectionState, i, k, j, direction) -> ConnectionState:
    """Cross h_{i>k;j}: S_ik += direction * S_ij * S_jk."""
    if len({i, k, j}) != 3:
        raise IndexError("labels must be distinct")
    n = state.stokes.n
    if not all(1 <= lab <= n for lab in (i, k, j)):
        raise IndexError("label out of range")
    out = state.copy()
    d = int(direction) * state.stokes.get(i, j) * state.stokes.get(j, k)
    out.stokes.m[i - 1][k - 1] += d
    if out.stokes.antisymmetric:
        # the coincident reversed line is crossed simultaneously
        out.stokes.m[k - 1][i - 1] = -out.stokes.m[i - 1][k - 1]
    out.log.append(
        {"kind": "higher", "labels": (i, k, j), "direction": int(direction)}
    )
    return out


def transport(state: ConnectionState, path, graph) -> ConnectionState:
    """Fold the automorphisms of all crossing events along the path."""
    path = [complex(w) for w in path]
    if abs(path[0] - state.at) > 1e-9:
        raise ValueError("path must start at state.at")
    events = tr.path_crossings(path, graph)
    cur = state.copy()
    for e in events:
        if e.kind == "ordinary":
            i, j = e.labels
            cur = apply_stokes(cur, i, j, e.direction)
        else:
            i, k, j = e.labels
            cur = apply_higher(cur, i, k, j, e.direction)
        cur.log[-1]["arclength"] = e.arclength
        cur.log[-1]["curve_id"] = e.curve_id
    cur.at = path[-1]
    return cur


def classify(curve, state: ConnectionState, beta=None):
    """Activity and relevance of a curve given adjacent transport data.

    Ordinary l_{i>j}: active iff S_ij != 0, relevant iff additionally
    sigma_i != 0 (instantiated when beta is given).  Higher h_{i>k;j}:
    active iff S_ij S_jk != 0; relevance is not defined and mirrors
    activity.
    """
    S = state.stokes
    if len(curve.labels) == 2:
        i, j = curve.labels
        active = S.get(i, j) != 0
        if beta is not None:
            sig_i = state.sigma.instantiate(beta)[i - 1]
            nonzero = sig_i != 0
        else:
            nonzero = any(c != 0 for c in state.sigma.form(i))
        relevant = active and nonzero
    else:
        i, k, j = curve.labels
        active = S.get(i, j) * S.get(j, k) != 0
        relevant = active
    return (
        "active" if active else "inactive",
        "relevant" if relevant else "irrelevant",
    )


def _semicircle(center, z0, z1, radius, side, n=12):
    """Polyline detour replacing the chord through a guarded point."""
    d = z1 - z0
    u = d / abs(d)
    t = ((center - z0) / u).real
    foot = z0 + t * u
    normal = 1j * u * side
    # half-circle from foot - r*u to foot + r*u on the chosen side
    pts = []
    for k in range(n + 1):
        ang = np.pi * k / n
        pts.append(foot - radius * np.cos(ang) * u + radius * np.sin(ang) * normal)
    return [z0] + pts + [z1]


def _route(graph, z0, z1, max_rounds=16):
    """Straight path with semicircular detours around guarded points."""
    guard = np.concatenate(
        [graph.special_points(), np.array([c.point for c in graph.crossings])]
    )
    delta_safe = 1e-4 * graph.domain.diameter
    path = [complex(z0), complex(z1)]
    for _ in range(max_rounds):
        # nearest guarded point violating the margin on any segment
        worst = None
        for a, b in zip(path[:-1], path[1:]):
            seg = b - a
            L = abs(seg)
            if L == 0:
                continue
            u = seg / L
            for zg in guard:
                t = ((zg - a) / u).real
                t = min(max(t, 0.0), L)
                dist = abs(a + t * u - zg)
                if dist < 1.2 * delta_safe:
                    if worst is None or dist < worst[0]:
                        worst = (dist, a, b, zg)
        if worst is None:
            return path
        _, a, b, zg = worst
        k = path.index(a)
        for side in (1, -1):
            detour = _semicircle(zg, a, b, 2.5 * delta_safe, side)
            cand = path[:k] + detour + path[k + 2:]
            arr = np.array(cand)
            ls = LineString(np.column_stack([arr.real, arr.imag]))
            if all(
                ls.distance(Point(zg2.real, zg2.imag)) >= delta_safe
                for zg2 in guard
            ):
                path = cand
                break
        else:
            raise Unroutable(f"cannot route {z0} -> {z1} around {zg}")
    raise Unroutable(f"routing {z0} -> {z1} did not converge")


def region_tables(graph, base: ConnectionState, probes: dict):
    """Transport the base state to each labeled probe point.

    Returns (s_table, sigma_table): per-label independent S entries and
    per-label sigma linear forms (rows of integer coefficients).
    """
    s_table = {}
    sigma_table = {}
    for label, z in probes.items():
        # a probe is either a point or a waypoint chain ending at the point
        legs = [complex(w) for w in z] if isinstance(z, (list, tuple)) else [complex(z)]
        last_err = None
        for attempt in range(4):
            # jitter the probe slightly on retries to dodge tangencies
            zp = legs[-1] + attempt * 3e-4 * np.exp(2j * np.pi * attempt / 4)
            try:
                path = [base.at]
                for a, b in zip([base.at] + legs[:-1], legs[:-1] + [zp]):
                    path += _route(graph, a, b)[1:]
                state = transport(base, path, graph)
                break
            except (PathTooCloseToCrossing, Unroutable) as err:
                last_err = err
        else:
            raise Unroutable(f"no admissible path to region {label}: {last_err}")
        s_table[label] = state.stokes.independent_entries()
        sigma_table[label] = [state.sigma.form(i) for i in range(1, 5)]
    return s_table, sigma_table
