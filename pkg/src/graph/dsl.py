"""
Reader and writer for the ``.dag`` text format.

The format is a strict subset of dagitty's graph syntax plus a ``beta=``
edge attribute::

    dag {
      U [latent]
      WC0 -> IC1 [beta=0.4324]
      IC0 -> IC1 [beta=0.65]; U -> IC1
    }

``//`` and ``#`` start comments that run to the end of the line.
"""

import re
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Union

from graph.dag_model import Dag, DagValidationError, Edge, Node, NodeKind
from utils.errors import UserInputError

NODE_ATTRIBUTES = ("latent", "deterministic", "exposure", "outcome")

_TOKEN = re.compile(
    r"""
    (?P<comment>(?://|\#)[^\n]*)
  | (?P<ws>\s+)
  | (?P<arrow>->)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\],;=])
    """,
    re.VERBOSE,
)


class DagSyntaxError(UserInputError):
    def __init__(self, message: str, text: str, offset: int):
        line = text.count("\n", 0, offset) + 1
        column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(
            f"{message} at line {line}, column {column}",
            {"line": line, "column": column, "offset": offset},
        )
        self.line = line
        self.column = column


class UnknownAttributeError(DagSyntaxError):
    pass


class _Token(NamedTuple):
    kind: str
    value: str
    offset: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise DagSyntaxError(f"Unexpected character {text[pos]!r}", text, pos)
        kind = match.lastgroup
        if kind not in ("ws", "comment"):
            value = match.group()
            tokens.append(_Token(value if kind == "punct" else kind, value, pos))
        pos = match.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        # name -> [kind, tags, explicitly declared]
        self.nodes: Dict[str, list] = {}
        self.edges: List[Edge] = []

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, token: Optional[_Token] = None):
        token = token or self.current
        found = "end of input" if token.kind == "eof" else repr(token.value)
        return DagSyntaxError(f"{message}, found {found}", self.text, token.offset)

    def expect(self, kind: str, what: str) -> _Token:
        token = self.current
        if token.kind != kind:
            raise self.error(f"Expected {what}")
        self.pos += 1
        return token

    def accept(self, kind: str) -> Optional[_Token]:
        if self.current.kind == kind:
            token = self.current
            self.pos += 1
            return token
        return None

    def parse(self) -> Dag:
        keyword = self.expect("ident", "'dag'")
        if keyword.value != "dag":
            raise self.error("Expected 'dag'", keyword)
        self.expect("{", "'{'")
        while not self.accept("}"):
            if self.current.kind == "eof":
                raise self.error("Expected '}'")
            self.statement()
            self.accept(";")
        self.expect("eof", "end of input")

        nodes = [
            Node(name=name, kind=kind, tags=frozenset(tags))
            for name, (kind, tags, _) in self.nodes.items()
        ]
        return Dag(nodes=nodes, edges=self.edges)

    def statement(self):
        name = self.expect("ident", "a node name")
        if self.accept("arrow"):
            child = self.expect("ident", "a node name after '->'")
            beta = self.edge_attributes() if self.current.kind == "[" else None
            self.touch(name.value)
            self.touch(child.value)
            self.edges.append(Edge(parent=name.value, child=child.value, beta=beta))
        else:
            self.declare(name)

    def edge_attributes(self) -> float:
        self.expect("[", "'['")
        key = self.expect("ident", "'beta'")
        if key.value != "beta":
            raise UnknownAttributeError(f"Unknown edge attribute {key.value!r}", self.text, key.offset)
        self.expect("=", "'='")
        number = self.expect("number", "a number")
        self.expect("]", "']'")
        return float(number.value)

    def declare(self, name: _Token):
        entry = self.nodes.get(name.value)
        if entry is not None and entry[2]:
            raise DagValidationError(f"Duplicate node: {name.value}", {"node": name.value, "offset": name.offset})

        kind, tags = NodeKind.Observed, set()
        if self.accept("["):
            while True:
                attr = self.expect("ident", "a node attribute")
                if attr.value not in NODE_ATTRIBUTES:
                    raise UnknownAttributeError(f"Unknown node attribute {attr.value!r}", self.text, attr.offset)
                if attr.value in ("latent", "deterministic"):
                    if kind is not NodeKind.Observed:
                        raise DagSyntaxError(f"Conflicting node kinds for {name.value}", self.text, attr.offset)
                    kind = NodeKind(attr.value)
                else:
                    tags.add(attr.value)
                if not self.accept(","):
                    break
            self.expect("]", "']' or ','")

        if entry is None:
            self.nodes[name.value] = [kind, tags, True]
        else:
            entry[:] = [kind, tags, True]

    def touch(self, name: str):
        self.nodes.setdefault(name, [NodeKind.Observed, set(), False])


def parse_dag(text: str) -> Dag:
    return _Parser(text).parse()


def print_dag(dag: Dag) -> str:
    if not dag.nodes and not dag.edges:
        return "dag { }"

    lines = ["dag {"]
    for node in dag.nodes:
        attrs = [] if node.kind is NodeKind.Observed else [node.kind.value]
        attrs += sorted(node.tags)
        lines.append(f"  {node.name} [{', '.join(attrs)}]" if attrs else f"  {node.name}")
    for edge in dag.edges:
        suffix = "" if edge.beta is None else f" [beta={edge.beta!r}]"
        lines.append(f"  {edge.parent} -> {edge.child}{suffix}")
    lines.append("}")
    return "\n".join(lines)


def load_dag_file(path: Union[str, Path]) -> Dag:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise UserInputError(f"Cannot read DAG file {path}: {e}", {"path": str(path)}) from e
    return parse_dag(text)


def save_dag_file(dag: Dag, path: Union[str, Path]):
    Path(path).write_text(print_dag(dag) + "\n", encoding="utf-8")
