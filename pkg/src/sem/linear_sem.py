"""
Linear-Gaussian semantics for a causal diagram.

Every non-deterministic node ``v`` follows, on its standardized scale,

    z_v = sum(beta_pv * z_p for parents p) + residual_sd_v * e_v,   e_v ~ N(0, 1)

and is reported in outcome units as ``mean_v + sd_v * z_v``. Residual sds are
solved so each such node has unit standardized variance. Deterministic nodes
(change scores) are fixed linear combinations of their parents: of the raw
values for the unstandardized covariance, of the standardized values for the
standardized one. They must be sinks.

Internally each node is written as a row of loadings on the independent
residual draws, which gives covariances, sampling and effects from one
recursion.
"""

import json
import math
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from graph.dag_model import Dag, Edge, Node, NodeKind, UnknownNodeError
from sem.strategy import Strategy
from utils.errors import NumericalError, UsageError, UserInputError
from utils.logger import get_logger

logger = get_logger(__name__)

RESIDUAL_TOLERANCE = 1e-12
SINGULAR_CORRELATION = 1.0 - 1e-12


class NonPositiveResidualError(UserInputError):
    def __init__(self, node: str, explained: float):
        self.node = node
        super().__init__(
            f"Node {node}: parents explain a standardized variance of {explained:.6f} > 1; "
            "the coefficient set is inadmissible",
            {"node": node, "explained_variance": explained},
        )


class SemSchemaError(UserInputError):
    pass


class SingularSystemError(NumericalError):
    pass


class Scale(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = 0.0
    sd: float = Field(default=1.0, gt=0)


class CovMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    names: Tuple[str, ...]
    values: np.ndarray
    standardized: bool

    @model_validator(mode="after")
    def _square_symmetric(self) -> "CovMatrix":
        k = len(self.names)
        if self.values.shape != (k, k):
            raise UsageError(f"Covariance shape {self.values.shape} does not match {k} names")
        if not np.allclose(self.values, self.values.T, rtol=0, atol=1e-12):
            raise NumericalError("Covariance matrix is not symmetric")
        return self

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownNodeError(f"Unknown variable: {name}", {"node": name}) from None

    def __getitem__(self, pair: Tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.index(a), self.index(b)])

    def sub(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.index(n) for n in names]
        return self.values[np.ix_(idx, idx)]


class LinearSem(BaseModel):
    model_config = ConfigDict(frozen=True)

    dag: Dag
    coeff: Dict[Tuple[str, str], float]
    scale: Dict[str, Scale] = Field(default_factory=dict)
    residual_sd: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self) -> "LinearSem":
        pairs = {e.pair for e in self.dag.edges}
        missing = pairs - set(self.coeff)
        if missing:
            parent, child = sorted(missing)[0]
            raise SemSchemaError(f"Edge {parent} -> {child} has no path coefficient", {"edge": [parent, child]})
        extra = set(self.coeff) - pairs
        if extra:
            parent, child = sorted(extra)[0]
            raise SemSchemaError(f"Coefficient given for missing edge {parent} -> {child}", {"edge": [parent, child]})
        for value in self.coeff.values():
            if not math.isfinite(value):
                raise SemSchemaError(f"Path coefficients must be finite, got {value}")

        for node in self.dag.nodes:
            if node.kind is NodeKind.Deterministic:
                if self.dag.children(node.name):
                    raise SemSchemaError(
                        f"Deterministic node {node.name} must not have children", {"node": node.name}
                    )
            elif node.name not in self.scale:
                raise SemSchemaError(f"Node {node.name} has no mean/sd scale", {"node": node.name})
        return self

    @classmethod
    def from_dag(cls, dag: Dag, scale: Optional[Dict[str, Scale]] = None) -> "LinearSem":
        """Build from a Dag whose edges all carry ``beta=``; latent nodes default to N(0, 1)."""
        coeff = {}
        for edge in dag.edges:
            if edge.beta is None:
                raise SemSchemaError(
                    f"Edge {edge.parent} -> {edge.child} needs a beta= coefficient", {"edge": list(edge.pair)}
                )
            coeff[edge.pair] = edge.beta
        scale = dict(scale or {})
        for name in dag.names_of_kind(NodeKind.Latent):
            scale.setdefault(name, Scale())
        # coefficients live in ``coeff``; the stored diagram is the bare structure
        bare = Dag(nodes=dag.nodes, edges=[e.model_copy(update={"beta": None}) for e in dag.edges])
        return cls(dag=bare, coeff=coeff, scale=scale)

    @property
    def solved(self) -> bool:
        return len(self.residual_sd) == len(self.dag.nodes)

    def is_deterministic(self, name: str) -> bool:
        return self.dag.node(name).kind is NodeKind.Deterministic

    def annotated_dag(self) -> Dag:
        """The diagram with every edge carrying its coefficient."""
        edges = [e.model_copy(update={"beta": self.coeff[e.pair]}) for e in self.dag.edges]
        return Dag(nodes=self.dag.nodes, edges=edges)

    def extend(
        self,
        nodes: Iterable[Node] = (),
        edges: Iterable[Edge] = (),
        scale: Optional[Dict[str, Scale]] = None,
    ) -> "LinearSem":
        """A new, unsolved SEM with extra nodes and edges (edges must carry beta)."""
        nodes, edges = list(nodes), list(edges)
        dag = self.dag.extend(nodes, [e.model_copy(update={"beta": None}) for e in edges])
        coeff = dict(self.coeff)
        for edge in edges:
            if edge.beta is None:
                raise SemSchemaError(f"Edge {edge.parent} -> {edge.child} needs a coefficient")
            coeff[edge.pair] = edge.beta
        merged = dict(self.scale)
        merged.update(scale or {})
        for node in nodes:
            if node.kind is NodeKind.Latent:
                merged.setdefault(node.name, Scale())
        return LinearSem(dag=dag, coeff=coeff, scale=merged)

    def with_change_score(self, baseline: str, followup: str, name: Optional[str] = None) -> "LinearSem":
        name = name or f"D{followup}"
        return self.extend(
            [Node(name=name, kind=NodeKind.Deterministic)],
            [Edge(parent=followup, child=name, beta=1.0), Edge(parent=baseline, child=name, beta=-1.0)],
        )


class _Loadings(NamedTuple):
    order: List[str]
    stochastic: List[str]
    standardized: Dict[str, np.ndarray]
    raw: Dict[str, np.ndarray]
    mean: Dict[str, float]
    residual_sd: Dict[str, float]


def _loadings(sem: LinearSem) -> _Loadings:
    order = sem.dag.topological_order()
    stochastic = [v for v in order if not sem.is_deterministic(v)]
    column = {v: i for i, v in enumerate(stochastic)}
    standardized, raw, mean, residual = {}, {}, {}, {}

    for v in order:
        parents = sem.dag.parents(v)
        row = np.zeros(len(stochastic))
        for p in parents:
            row += sem.coeff[(p, v)] * standardized[p]

        if sem.is_deterministic(v):
            residual[v] = 0.0
            standardized[v] = row
            raw[v] = sum((sem.coeff[(p, v)] * raw[p] for p in parents), np.zeros(len(stochastic)))
            mean[v] = sum(sem.coeff[(p, v)] * mean[p] for p in parents)
            continue

        explained = float(row @ row)
        if explained > 1.0 + RESIDUAL_TOLERANCE:
            raise NonPositiveResidualError(v, explained)
        residual[v] = math.sqrt(max(0.0, 1.0 - explained))
        row[column[v]] = residual[v]
        standardized[v] = row
        raw[v] = sem.scale[v].sd * row
        mean[v] = sem.scale[v].mean

    return _Loadings(order, stochastic, standardized, raw, mean, residual)


def solve_residual_variances(sem: LinearSem) -> LinearSem:
    residual = _loadings(sem).residual_sd
    logger.debug("Residual sds: %s", {v: round(s, 6) for v, s in residual.items()})
    return sem.model_copy(update={"residual_sd": {v: residual[v] for v in sem.dag.node_names}})


def residual_variance(sem: LinearSem, node: str) -> float:
    sem = _solved(sem)
    sem.dag.node(node)
    return sem.residual_sd[node] ** 2


def _solved(sem: LinearSem) -> LinearSem:
    return sem if sem.solved else solve_residual_variances(sem)


def implied_covariance(sem: LinearSem, standardized: bool = True) -> CovMatrix:
    loadings = _loadings(sem)
    rows = loadings.standardized if standardized else loadings.raw
    names = tuple(sem.dag.node_names)
    a = np.vstack([rows[n] for n in names]) if names else np.zeros((0, 0))
    cov = a @ a.T
    return CovMatrix(names=names, values=(cov + cov.T) / 2.0, standardized=standardized)


def implied_means(sem: LinearSem) -> Dict[str, float]:
    return dict(_loadings(sem).mean)


def sd_of(sem: LinearSem, node: str) -> float:
    if not sem.is_deterministic(node):
        return sem.scale[node].sd
    return math.sqrt(implied_covariance(sem, standardized=False)[node, node])


def partial_correlation(cov: CovMatrix, a: str, b: str, z: Sequence[str] = ()) -> float:
    names = [a, b] + list(z)
    try:
        precision = np.linalg.inv(cov.sub(names))
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Covariance of {names} is singular", {"variables": names}) from e
    return float(-precision[0, 1] / math.sqrt(precision[0, 0] * precision[1, 1]))


# -- effects -------------------------------------------------------------


class EffectDecomposition(NamedTuple):
    total: float
    direct: float
    indirect: float


def total_effect(sem: LinearSem, x: str, y: str) -> float:
    """Sum over directed paths x -> ... -> y of the product of path coefficients."""
    sem.dag.node(x)
    sem.dag.node(y)
    if x == y:
        return 0.0
    graph = sem.dag.as_networkx()
    total = 0.0
    for path in nx.all_simple_paths(graph, x, y):
        total += math.prod(sem.coeff[(u, v)] for u, v in zip(path, path[1:]))
    return total


def total_effect_matrix(sem: LinearSem) -> CovMatrix:
    """
    Cumulative effects (I - B)^-1 - I, where B[i, j] is the coefficient of i -> j.

    Returned in a CovMatrix container for named lookup; it is not symmetric in
    general, so the symmetry check is skipped by building it directly.
    """
    names = tuple(sem.dag.node_names)
    index = {n: i for i, n in enumerate(names)}
    b = np.zeros((len(names), len(names)))
    for (parent, child), value in sem.coeff.items():
        b[index[parent], index[child]] = value
    effects = np.linalg.inv(np.eye(len(names)) - b) - np.eye(len(names))
    return CovMatrix.model_construct(names=names, values=effects, standardized=True)


def direct_effect(sem: LinearSem, x: str, y: str) -> float:
    sem.dag.node(x)
    sem.dag.node(y)
    return sem.coeff.get((x, y), 0.0)


def to_unstandardized(coef: float, sem: LinearSem, x: str, y: str) -> float:
    return coef * sd_of(sem, y) / sd_of(sem, x)


def effect_decomposition(sem: LinearSem, x: str, y: str, unstandardized: bool = False) -> EffectDecomposition:
    total = total_effect(sem, x, y)
    direct = direct_effect(sem, x, y)
    if unstandardized:
        total = to_unstandardized(total, sem, x, y)
        direct = to_unstandardized(direct, sem, x, y)
    return EffectDecomposition(total, direct, total - direct)


# -- analytic oracle -----------------------------------------------------


def expected_coefficient(sem: LinearSem, strategy: Strategy, exposure: str, baseline: str, followup: str) -> float:
    """Population value of the exposure coefficient, in followup units per exposure unit."""
    for role, name in (("exposure", exposure), ("baseline", baseline), ("followup", followup)):
        if sem.dag.node(name).kind is not NodeKind.Observed:
            raise UsageError(f"The {role} node {name} must be observed", {role: name})

    c = implied_covariance(sem, standardized=False)
    cxx, cx0, cx1 = c[exposure, exposure], c[exposure, baseline], c[exposure, followup]

    if strategy is Strategy.FollowUpUnadjusted:
        return cx1 / cxx
    if strategy is Strategy.ChangeScore:
        return (cx1 - cx0) / cxx

    c00, c01 = c[baseline, baseline], c[baseline, followup]
    if abs(cx0) / math.sqrt(cxx * c00) >= SINGULAR_CORRELATION:
        raise SingularSystemError(
            f"{exposure} and {baseline} are perfectly correlated; the adjusted model is not identified",
            {"exposure": exposure, "baseline": baseline},
        )
    solution = np.linalg.solve(np.array([[cxx, cx0], [cx0, c00]]), np.array([cx1, c01]))
    return float(solution[0])


def expected_coefficients(sem: LinearSem, exposure: str, baseline: str, followup: str) -> Dict[Strategy, float]:
    return {s: expected_coefficient(sem, s, exposure, baseline, followup) for s in Strategy}


# -- JSON ----------------------------------------------------------------


class _NodeDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: NodeKind = NodeKind.Observed
    mean: Optional[float] = None
    sd: Optional[float] = None
    tags: List[str] = Field(default_factory=list)


class _EdgeDoc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    parent: str = Field(alias="from")
    child: str = Field(alias="to")
    beta: float

    @field_validator("beta")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("beta must be finite")
        return value


class SemDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nodes: List[_NodeDoc]
    edges: List[_EdgeDoc] = Field(default_factory=list)


def sem_to_json(sem: LinearSem) -> dict:
    nodes = []
    for node in sem.dag.nodes:
        doc = {"name": node.name, "kind": node.kind.value}
        if node.name in sem.scale:
            doc["mean"] = sem.scale[node.name].mean
            doc["sd"] = sem.scale[node.name].sd
        if node.tags:
            doc["tags"] = sorted(node.tags)
        nodes.append(doc)
    edges = [{"from": e.parent, "to": e.child, "beta": sem.coeff[e.pair]} for e in sem.dag.edges]
    return {"nodes": nodes, "edges": edges}


def sem_from_json(doc: dict, solve: bool = True) -> LinearSem:
    try:
        parsed = SemDocument.model_validate(doc)
    except ValidationError as e:
        raise SemSchemaError(f"Invalid SEM document: {e.errors()[0]['msg']}", {"errors": e.errors()}) from e

    nodes, scale = [], {}
    for nd in parsed.nodes:
        nodes.append(Node(name=nd.name, kind=nd.kind, tags=frozenset(nd.tags)))
        if nd.kind is NodeKind.Deterministic:
            continue
        if nd.kind is NodeKind.Observed and (nd.mean is None or nd.sd is None):
            raise SemSchemaError(f"Observed node {nd.name} needs mean and sd", {"node": nd.name})
        if nd.sd is not None and nd.sd <= 0:
            raise SemSchemaError(f"Node {nd.name} needs sd > 0", {"node": nd.name})
        scale[nd.name] = Scale(
            mean=0.0 if nd.mean is None else nd.mean,
            sd=1.0 if nd.sd is None else nd.sd,
        )

    dag = Dag(nodes=nodes, edges=[Edge(parent=e.parent, child=e.child) for e in parsed.edges])
    coeff = {(e.parent, e.child): e.beta for e in parsed.edges}
    sem = LinearSem(dag=dag, coeff=coeff, scale=scale)
    return solve_residual_variances(sem) if solve else sem


def load_sem_file(path: Union[str, Path]) -> LinearSem:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SemSchemaError(f"Cannot read SEM file {path}: {e}", {"path": str(path)}) from e
    return sem_from_json(doc)


def save_sem_file(sem: LinearSem, path: Union[str, Path]):
    Path(path).write_text(json.dumps(sem_to_json(sem), indent=2) + "\n", encoding="utf-8")
