"""Reaction networks: the DSL parser, canonical printer and structural analysis.

A network is a directed graph whose vertices (complexes) are nonnegative
vectors over a fixed species universe. Everything downstream (kinetics,
steady states, simulation) reads its structure from :class:`ReactionNetwork`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

RANK_RTOL = 1e-9

VALIDATION_MODES = ("integer", "real")


class NetworkError(ValueError):
    """Structural violation: self-loop, duplicate edge, bad coefficient."""


class DSLSyntaxError(NetworkError):
    def __init__(self, message: str, line: int, col: int, source: str | None = None):
        self.line = line
        self.col = col
        self.source = source
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line}:{col}: {message}")


Complex = tuple[Fraction, ...]


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    complexes: tuple[Complex, ...]
    edges: tuple[tuple[int, int], ...]
    mode: str = "integer"

    def __post_init__(self):
        n = len(self.species)
        if len(set(self.species)) != n:
            raise NetworkError("duplicate species names")
        if self.mode not in VALIDATION_MODES:
            raise NetworkError(f"unknown validation mode {self.mode!r}")
        if len(set(self.complexes)) != len(self.complexes):
            raise NetworkError("duplicate vertices")
        for c in self.complexes:
            if len(c) != n:
                raise NetworkError("complex length does not match species count")
            _check_coords(c, self.mode)
        if len(set(self.edges)) != len(self.edges):
            raise NetworkError("duplicate reactions")
        used = set()
        for i, j in self.edges:
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise NetworkError(f"edge ({i}, {j}) references a missing vertex")
            if i == j:
                raise NetworkError(f"self-loop at {self.complex_str(i)}")
            used.update((i, j))
        if len(used) != self.m:
            raise NetworkError("isolated vertex")
        if not self.edges:
            raise NetworkError("network has no reactions")

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def m(self) -> int:
        return len(self.complexes)

    @property
    def r(self) -> int:
        return len(self.edges)

    @cached_property
    def Y(self) -> np.ndarray:
        """m x n float matrix whose rows are the complexes."""
        return np.array([[float(v) for v in c] for c in self.complexes], dtype=float).reshape(self.m, self.n)

    @cached_property
    def integral(self) -> bool:
        return all(v.denominator == 1 for c in self.complexes for v in c)

    @cached_property
    def sources(self) -> np.ndarray:
        return np.array([i for i, _ in self.edges], dtype=int)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([j for _, j in self.edges], dtype=int)

    @cached_property
    def reaction_vectors(self) -> np.ndarray:
        """r x n matrix of y_j - y_i, one row per edge."""
        return self.Y[self.targets] - self.Y[self.sources]

    @cached_property
    def source_matrix(self) -> np.ndarray:
        """r x n matrix of source complexes (monomial exponents per edge)."""
        return self.Y[self.sources]

    def complex_str(self, i: int) -> str:
        return format_complex(self.complexes[i], self.species)

    def reaction_str(self, k: int) -> str:
        i, j = self.edges[k]
        return f"{self.complex_str(i)} -> {self.complex_str(j)}"

    def reaction_strs(self) -> list[str]:
        return [self.reaction_str(k) for k in range(self.r)]

    def edge_index(self, text: str) -> int:
        """Index of the edge whose canonical text matches ``text`` (spacing ignored)."""
        key = _normalize_reaction_key(text, self)
        for k in range(self.r):
            if self.reaction_str(k) == key:
                return k
        raise KeyError(f"no reaction {text!r} in network")

    @cached_property
    def graph(self) -> csr_matrix:
        """Sparse adjacency of the reaction graph (vertex i -> j)."""
        return csr_matrix((np.ones(self.r), (self.sources, self.targets)), shape=(self.m, self.m))

    @cached_property
    def linkage(self) -> tuple[tuple[int, ...], ...]:
        return _components(self, "weak")

    @cached_property
    def strong(self) -> tuple[tuple[int, ...], ...]:
        return _components(self, "strong")

    @property
    def is_weakly_reversible(self) -> bool:
        return len(self.strong) == len(self.linkage)

    @cached_property
    def analysis(self) -> StoichAnalysis:
        return analyze(self)


@dataclass(frozen=True)
class StoichAnalysis:
    linkage_classes: tuple[tuple[int, ...], ...]
    strong_components: tuple[tuple[int, ...], ...]
    weakly_reversible: bool
    stoich_basis: np.ndarray = field(repr=False)
    complement_basis: np.ndarray = field(repr=False)
    dim_S: int
    deficiency: int

    @property
    def n_linkage(self) -> int:
        return len(self.linkage_classes)


def _check_coords(c: Complex, mode: str) -> None:
    for v in c:
        if v < 0:
            raise NetworkError(f"negative stoichiometric coefficient {v}")
        if mode == "integer" and v.denominator != 1:
            raise NetworkError(f"non-integer coefficient {v} in integer mode")
        if mode == "real" and 0 < v < 1:
            raise NetworkError(f"coefficient {v} lies in (0, 1); vertices must be 0 or >= 1")


# ---------------------------------------------------------------------------
# DSL

_TERM_RE = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*")
_ZERO_RE = re.compile(r"\s*0\s*$")
_ARROW_RE = re.compile(r"<->|->")


@dataclass(frozen=True)
class ParsedStatement:
    line: int
    lhs: dict[str, Fraction]
    rhs: dict[str, Fraction]
    reversible: bool
    rates: tuple[int | float, ...] | None


def _parse_complex(text: str, line: int, col0: int, order: list[str]) -> dict[str, Fraction]:
    if not text.strip():
        raise DSLSyntaxError("empty complex (write 0 for the zero complex)", line, col0 + 1)
    if _ZERO_RE.match(text):
        return {}
    out: dict[str, Fraction] = {}
    pos = 0
    for part in text.split("+"):
        m = _TERM_RE.fullmatch(part)
        if m is None:
            lead = len(part) - len(part.lstrip())
            raise DSLSyntaxError(f"malformed term {part.strip()!r}", line, col0 + pos + lead + 1)
        coeff = Fraction(m.group(1)) if m.group(1) else Fraction(1)
        name = m.group(2)
        if name not in order:
            order.append(name)
        out[name] = out.get(name, Fraction(0)) + coeff
        pos += len(part) + 1
    return {k: v for k, v in out.items() if v != 0}


def _rate_literal(text: str) -> int | float:
    # integer literals stay exact, as they do in JSON rate files
    return int(text) if text.isdigit() else float(text)


def parse_statements(text: str, source: str | None = None) -> tuple[list[str], list[ParsedStatement]]:
    species: list[str] = []
    stmts: list[ParsedStatement] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        rates = None
        if ":" in body:
            body, rate_txt = body.split(":", 1)
            try:
                rates = tuple(_rate_literal(v) for v in rate_txt.replace(",", " ").split())
            except ValueError:
                raise DSLSyntaxError(f"bad rate annotation {rate_txt.strip()!r}", lineno, len(body) + 2, source) from None
        arrows = list(_ARROW_RE.finditer(body))
        if len(arrows) != 1:
            col = arrows[1].start() + 1 if arrows else len(body.rstrip()) + 1
            raise DSLSyntaxError("expected exactly one '->' or '<->'", lineno, col, source)
        a = arrows[0]
        try:
            lhs = _parse_complex(body[: a.start()], lineno, 0, species)
            rhs = _parse_complex(body[a.end():], lineno, a.end(), species)
        except DSLSyntaxError as e:
            raise DSLSyntaxError(str(e).split(": ", 1)[1], e.line, e.col, source) from None
        reversible = a.group() == "<->"
        if rates is not None and len(rates) != (2 if reversible else 1):
            raise DSLSyntaxError("wrong number of rate constants", lineno, len(body) + 2, source)
        stmts.append(ParsedStatement(lineno, lhs, rhs, reversible, rates))
    if not stmts:
        raise DSLSyntaxError("no reactions found", 1, 1, source)
    return species, stmts


def parse_network_with_rates(text: str, mode: str = "integer", source: str | None = None):
    """Parse DSL text; returns ``(network, rates)`` where ``rates`` lists the
    annotated constants in edge order (integer literals kept as ints) if every
    statement carried a ``: k`` annotation, else None."""
    species, stmts = parse_statements(text, source)
    complexes: list[Complex] = []
    index: dict[Complex, int] = {}
    edges: list[tuple[int, int]] = []
    rates: list[float] = []

    def vertex(d: dict[str, Fraction]) -> int:
        c = tuple(d.get(s, Fraction(0)) for s in species)
        if c not in index:
            index[c] = len(complexes)
            complexes.append(c)
        return index[c]

    for st in stmts:
        i, j = vertex(st.lhs), vertex(st.rhs)
        where = f"{source}:" if source else "line "
        if i == j:
            raise NetworkError(f"{where}{st.line}: self-loop reaction {format_complex(complexes[i], species)}")
        pairs = [(i, j), (j, i)] if st.reversible else [(i, j)]
        for e in pairs:
            if e in edges:
                raise NetworkError(f"{where}{st.line}: duplicate reaction")
            edges.append(e)
        if st.rates is not None:
            rates.extend(st.rates)
        for c in (complexes[i], complexes[j]):
            try:
                _check_coords(c, mode)
            except NetworkError as e:
                raise NetworkError(f"{where}{st.line}: {e}") from None
    net = ReactionNetwork(tuple(species), tuple(complexes), tuple(edges), mode)
    have_all = all(st.rates is not None for st in stmts)
    return net, (rates if have_all else None)


def parse_network(text: str, mode: str = "integer", source: str | None = None) -> ReactionNetwork:
    return parse_network_with_rates(text, mode, source)[0]


def load_network(path, mode: str = "integer") -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read(), mode, source=str(path))


def _fmt_coeff(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return repr(float(v))


def format_complex(c: Sequence[Fraction], species: Sequence[str]) -> str:
    terms = []
    for v, s in zip(c, species):
        if v == 0:
            continue
        terms.append(s if v == 1 else f"{_fmt_coeff(v)}{s}")
    return "+".join(terms) if terms else "0"


def format_network(net: ReactionNetwork) -> str:
    """Canonical DSL text: one irreversible reaction per line, in edge order."""
    return "\n".join(net.reaction_strs()) + "\n"


def _normalize_reaction_key(text: str, net: ReactionNetwork) -> str:
    _, stmts = parse_statements(text)
    if len(stmts) != 1 or stmts[0].reversible:
        raise KeyError(f"not a single irreversible reaction: {text!r}")
    st = stmts[0]
    lhs = tuple(st.lhs.get(s, Fraction(0)) for s in net.species)
    rhs = tuple(st.rhs.get(s, Fraction(0)) for s in net.species)
    if set(st.lhs) - set(net.species) or set(st.rhs) - set(net.species):
        raise KeyError(f"unknown species in {text!r}")
    return f"{format_complex(lhs, net.species)} -> {format_complex(rhs, net.species)}"


# ---------------------------------------------------------------------------
# structure

def _components(net: ReactionNetwork, connection: str) -> tuple[tuple[int, ...], ...]:
    _, labels = connected_components(net.graph, directed=True, connection=connection)
    groups: dict[int, list[int]] = {}
    for v, lab in enumerate(labels):
        groups.setdefault(lab, []).append(v)
    return tuple(sorted((tuple(g) for g in groups.values()), key=lambda g: g[0]))


def linkage_classes(net: ReactionNetwork) -> tuple[tuple[int, ...], ...]:
    """Connected components of the underlying undirected graph."""
    return net.linkage


def strong_components(net: ReactionNetwork) -> tuple[tuple[int, ...], ...]:
    return net.strong


def weak_reversibility(net: ReactionNetwork) -> bool:
    """True iff every linkage class is a single strongly connected component."""
    return net.is_weakly_reversible


def exact_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Rank by exact elimination (fraction-free on integers)."""
    if not rows:
        return 0
    mat = [[Fraction(v) for v in r] for r in rows]
    if all(v.denominator == 1 for r in mat for v in r):
        mat = [[int(v) for v in r] for r in mat]
    rank, ncol = 0, len(mat[0])
    for col in range(ncol):
        piv = next((k for k in range(rank, len(mat)) if mat[k][col] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        p = mat[rank]
        for k in range(rank + 1, len(mat)):
            if mat[k][col] != 0:
                a, b = mat[k][col], p[col]
                mat[k] = [x * b - y * a for x, y in zip(mat[k], p)]
        rank += 1
    return rank


def stoichiometric_subspace(net: ReactionNetwork, exact: bool | None = None) -> tuple[np.ndarray, int]:
    """Orthonormal basis (rows) of span{y_j - y_i} and its dimension.

    ``exact`` selects fraction-exact rank; by default it is used whenever
    every coordinate is an integer. The basis always comes from the SVD.
    """
    basis, _, dim = _svd_split(net, exact)
    return basis, dim


def _svd_split(net: ReactionNetwork, exact: bool | None):
    R = net.reaction_vectors
    _, sv, vt = np.linalg.svd(R, full_matrices=True)
    if exact is None:
        exact = net.integral
    if exact:
        diffs = [[b - a for a, b in zip(net.complexes[i], net.complexes[j])] for i, j in net.edges]
        dim = exact_rank(diffs)
    else:
        dim = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    return vt[:dim].copy(), vt[dim:].copy(), dim


def deficiency(net: ReactionNetwork) -> int:
    return net.analysis.deficiency


def analyze(net: ReactionNetwork, exact: bool | None = None) -> StoichAnalysis:
    lcs = net.linkage
    scs = net.strong
    basis, comp, dim = _svd_split(net, exact)
    delta = net.m - len(lcs) - dim
    if delta < 0:
        raise ArithmeticError(f"negative deficiency {delta}: rank computation is inconsistent")
    return StoichAnalysis(lcs, scs, len(scs) == len(lcs), basis, comp, dim, delta)


def project_complement(net: ReactionNetwork, v: np.ndarray) -> np.ndarray:
    """Component of ``v`` orthogonal to the stoichiometric subspace (coordinates in S-perp basis)."""
    return net.analysis.complement_basis @ np.asarray(v, dtype=float)


def require_positive(x, what: str = "state") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError(f"{what} must be strictly positive")
    return x


def compatibility_class_membership(net: ReactionNetwork, x0, x, tol: float = 1e-10) -> bool:
    """True iff ``x`` lies in the compatibility class of ``x0`` (both positive)."""
    x0 = require_positive(x0)
    x = require_positive(x)
    if x0.shape != (net.n,) or x.shape != (net.n,):
        raise ValueError("state dimension does not match the species count")
    scale = max(1.0, float(np.max(np.abs(x0))))
    return float(np.linalg.norm(project_complement(net, x - x0))) <= tol * scale
