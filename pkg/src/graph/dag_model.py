"""
Causal diagrams: nodes, edges, d-separation and the role of the baseline outcome.

A ``Dag`` is an immutable pydantic model. Graph queries go through a cached
networkx ``DiGraph`` built from the model, never stored on it, so two Dags
compare equal exactly when their nodes and edges do.
"""

import math
import re
from enum import Enum
from functools import lru_cache
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from sem.strategy import Strategy
from utils.errors import UsageError, UserInputError
from utils.logger import get_logger

logger = get_logger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
NODE_TAGS = frozenset({"exposure", "outcome"})


class DagValidationError(UserInputError):
    pass


class CycleError(DagValidationError):
    def __init__(self, cycle: List[str]):
        self.cycle = cycle
        super().__init__(
            "Graph contains the cycle " + " -> ".join(cycle + cycle[:1]),
            {"cycle": cycle},
        )


class DuplicateNodeError(DagValidationError):
    pass


class UnknownNodeError(DagValidationError):
    pass


class UnsupportedPatternError(UserInputError):
    pass


class InvalidEstimandError(UserInputError):
    pass


class NodeKind(str, Enum):
    Observed = "observed"
    Latent = "latent"
    Deterministic = "deterministic"


class Role(str, Enum):
    CompetingExposure = "CompetingExposure"
    Confounder = "Confounder"
    Mediator = "Mediator"


class Estimand(str, Enum):
    TotalEffect = "total"
    DirectEffect = "direct"


class Node(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: NodeKind = NodeKind.Observed
    tags: FrozenSet[str] = frozenset()

    @field_validator("name")
    @classmethod
    def _identifier(cls, value: str) -> str:
        if not IDENTIFIER.match(value):
            raise DagValidationError(f"Invalid node name: {value!r}", {"node": value})
        return value

    @field_validator("tags")
    @classmethod
    def _known_tags(cls, value: FrozenSet[str]) -> FrozenSet[str]:
        unknown = set(value) - NODE_TAGS
        if unknown:
            raise DagValidationError(f"Unknown node tags: {sorted(unknown)}", {"tags": sorted(unknown)})
        return value


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    parent: str
    child: str
    beta: Optional[float] = None

    @field_validator("beta")
    @classmethod
    def _finite(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not math.isfinite(value):
            raise DagValidationError(f"Edge coefficient must be finite, got {value}")
        return value

    @property
    def pair(self) -> Tuple[str, str]:
        return self.parent, self.child


class Dag(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: Tuple[Node, ...] = ()
    edges: Tuple[Edge, ...] = ()

    @model_validator(mode="after")
    def _validate(self) -> "Dag":
        names = set()
        for node in self.nodes:
            if node.name in names:
                raise DuplicateNodeError(f"Duplicate node: {node.name}", {"node": node.name})
            names.add(node.name)

        pairs = set()
        for edge in self.edges:
            for end in edge.pair:
                if end not in names:
                    raise UnknownNodeError(f"Edge {edge.parent} -> {edge.child} names unknown node {end}", {"node": end})
            if edge.parent == edge.child:
                raise CycleError([edge.parent])
            if edge.pair in pairs:
                raise DagValidationError(
                    f"Duplicate edge: {edge.parent} -> {edge.child}", {"edge": list(edge.pair)}
                )
            pairs.add(edge.pair)

        graph = _digraph(self)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = [u for u, _ in nx.find_cycle(graph)]
            raise CycleError(cycle)

        for node in self.nodes:
            if node.kind is NodeKind.Deterministic and graph.in_degree(node.name) == 0:
                raise DagValidationError(
                    f"Deterministic node {node.name} needs at least one parent", {"node": node.name}
                )
        return self

    # -- lookups ---------------------------------------------------------

    @property
    def node_names(self) -> List[str]:
        return [n.name for n in self.nodes]

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise UnknownNodeError(f"Unknown node: {name}", {"node": name})

    def names_of_kind(self, kind: NodeKind) -> List[str]:
        return [n.name for n in self.nodes if n.kind is kind]

    def edge(self, parent: str, child: str) -> Optional[Edge]:
        for edge in self.edges:
            if edge.pair == (parent, child):
                return edge
        return None

    def has_edge(self, parent: str, child: str) -> bool:
        return self.edge(parent, child) is not None

    def parents(self, name: str) -> List[str]:
        self.node(name)
        return [e.parent for e in self.edges if e.child == name]

    def children(self, name: str) -> List[str]:
        self.node(name)
        return [e.child for e in self.edges if e.parent == name]

    def ancestors(self, name: str) -> Set[str]:
        self.node(name)
        return set(nx.ancestors(_digraph(self), name))

    def descendants(self, name: str) -> Set[str]:
        self.node(name)
        return set(nx.descendants(_digraph(self), name))

    def topological_order(self) -> List[str]:
        index = {name: i for i, name in enumerate(self.node_names)}
        return list(nx.lexicographical_topological_sort(_digraph(self), key=index.__getitem__))

    def as_networkx(self) -> nx.DiGraph:
        """Return a private copy of the graph (safe to mutate)."""
        return _digraph(self).copy()

    # -- derivation ------------------------------------------------------

    def extend(self, nodes: Iterable[Node] = (), edges: Iterable[Edge] = ()) -> "Dag":
        return Dag(nodes=self.nodes + tuple(nodes), edges=self.edges + tuple(edges))

    def with_change_score(self, baseline: str, followup: str, name: Optional[str] = None) -> "Dag":
        name = name or f"D{followup}"
        return self.extend(
            [Node(name=name, kind=NodeKind.Deterministic)],
            [Edge(parent=followup, child=name, beta=1.0), Edge(parent=baseline, child=name, beta=-1.0)],
        )


@lru_cache(maxsize=512)
def _digraph(dag: Dag) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(n.name for n in dag.nodes)
    graph.add_edges_from(e.pair for e in dag.edges)
    return graph


def _as_set(dag: Dag, names: Iterable[str]) -> Set[str]:
    if isinstance(names, str):
        names = {names}
    names = set(names)
    for name in names:
        dag.node(name)
    return names


def d_separated(dag: Dag, a: Iterable[str], b: Iterable[str], z: Iterable[str] = ()) -> bool:
    """
    True iff every path between ``a`` and ``b`` is blocked given ``z``.

    Node names are checked against ``dag`` first so an unknown name is a
    user error, not a networkx one.
    """
    a, b, z = _as_set(dag, a), _as_set(dag, b), _as_set(dag, z)
    if a & b or a & z or b & z:
        raise UsageError("d-separation sets must be pairwise disjoint", {"a": sorted(a), "b": sorted(b), "z": sorted(z)})
    if not a or not b:
        return True

    return nx.is_d_separator(_digraph(dag), a, b, z)


def local_markov_statements(dag: Dag) -> List[Tuple[str, FrozenSet[str], FrozenSet[str]]]:
    statements = []
    for name in dag.node_names:
        parents = frozenset(dag.parents(name))
        rest = frozenset(dag.node_names) - dag.descendants(name) - parents - {name}
        statements.append((name, rest, parents))
    return statements


def classify_baseline_role(dag: Dag, exposure: str, baseline: str, followup: str) -> Role:
    bindings = {"exposure": exposure, "baseline": baseline, "followup": followup}
    if len(set(bindings.values())) != 3:
        raise UnsupportedPatternError("exposure, baseline and followup must be distinct nodes", bindings)
    for role, name in bindings.items():
        if dag.node(name).kind is not NodeKind.Observed:
            raise UnsupportedPatternError(f"{role} node {name} must be observed", bindings)
    if exposure not in dag.ancestors(followup):
        raise UnsupportedPatternError(f"No directed path from {exposure} to {followup}", bindings)

    causes_exposure = dag.has_edge(baseline, exposure)
    caused_by_exposure = dag.has_edge(exposure, baseline)
    if causes_exposure and caused_by_exposure:
        raise UnsupportedPatternError(f"Both {baseline} -> {exposure} and {exposure} -> {baseline} present", bindings)

    # indirect links between exposure and baseline are outside the three supported shapes
    if not causes_exposure and baseline in dag.ancestors(exposure):
        raise UnsupportedPatternError(f"{baseline} causes {exposure} only through other nodes", bindings)
    if not caused_by_exposure and exposure in dag.ancestors(baseline):
        raise UnsupportedPatternError(f"{exposure} causes {baseline} only through other nodes", bindings)

    logger.debug("%s -> %s: %s, %s -> %s: %s", baseline, exposure, causes_exposure, exposure, baseline, caused_by_exposure)
    if causes_exposure:
        return Role.Confounder
    if caused_by_exposure:
        return Role.Mediator
    if dag.has_edge(baseline, followup):
        return Role.CompetingExposure
    if baseline not in dag.ancestors(followup):
        raise UnsupportedPatternError(f"{baseline} is not an ancestor of {followup}", bindings)
    raise UnsupportedPatternError(f"{baseline} affects {followup} only through other nodes", bindings)


def recommend_strategy(role: Role, estimand: Estimand = Estimand.TotalEffect) -> Tuple[Strategy, List[str]]:
    if estimand is Estimand.DirectEffect and role is not Role.Mediator:
        raise InvalidEstimandError(
            f"A direct effect is only defined when the baseline outcome is a mediator (role is {role.value})",
            {"role": role.value, "estimand": estimand.value},
        )

    if role is Role.Confounder:
        return Strategy.FollowUpAdjusted, [
            "Adjustment for the baseline outcome is necessary: it is a classical confounder.",
        ]
    if role is Role.Mediator and estimand is Estimand.TotalEffect:
        return Strategy.FollowUpUnadjusted, [
            "The baseline outcome mediates the effect; adjusting for it would estimate the direct effect only.",
        ]
    if role is Role.Mediator:
        return Strategy.FollowUpAdjusted, [
            "Conditioning on the mediator introduces additional methodological challenges: "
            "any unmeasured mediator-outcome confounding biases the direct-effect estimate.",
        ]
    return Strategy.FollowUpUnadjusted, [
        "The change-score analysis may be used here without invoking inferential bias, "
        "but only because exposure and baseline outcome are unrelated.",
        "Adjusting for the baseline outcome closes one of the two confounding paths "
        "if an unmeasured common cause is present, reducing residual confounding.",
    ]
