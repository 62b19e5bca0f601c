import pytest

from graph.dag_model import CycleError, Dag, DagValidationError, Edge, Node, NodeKind
from graph.dsl import DagSyntaxError, UnknownAttributeError, load_dag_file, parse_dag, print_dag, save_dag_file
from utils.errors import UserInputError


def test_parses_chain():
    dag = parse_dag("dag { WC0 -> IC1 IC0 -> IC1 }")
    assert dag.node_names == ["WC0", "IC1", "IC0"]
    assert [e.pair for e in dag.edges] == [("WC0", "IC1"), ("IC0", "IC1")]


def test_parses_attributes_and_betas():
    text = """
    dag {
      U [latent]
      WC0 [exposure]
      IC1 [outcome]
      U -> WC0 [beta=0.2828]; U -> IC1
      WC0 -> IC1 [beta=4.3e-1]  // direct path
    }
    """
    dag = parse_dag(text)
    assert dag.node("U").kind is NodeKind.Latent
    assert dag.node("WC0").tags == frozenset({"exposure"})
    assert dag.edge("U", "WC0").beta == 0.2828
    assert dag.edge("U", "IC1").beta is None
    assert dag.edge("WC0", "IC1").beta == 0.43


def test_comments_are_skipped():
    dag = parse_dag("# header\ndag {\n  A -> B // trailing\n}\n")
    assert dag.has_edge("A", "B")


def test_empty_dag_round_trip():
    dag = parse_dag("dag { }")
    assert dag == Dag()
    assert print_dag(dag) == "dag { }"


def test_print_then_parse_is_identity(scenarios):
    for spec in scenarios.values():
        dag = spec.sem.annotated_dag()
        assert parse_dag(print_dag(dag)) == dag


def test_print_format():
    dag = Dag(
        nodes=[Node(name="U", kind=NodeKind.Latent), Node(name="A"), Node(name="B")],
        edges=[Edge(parent="U", child="A", beta=0.5), Edge(parent="A", child="B")],
    )
    assert print_dag(dag) == "dag {\n  U [latent]\n  A\n  B\n  U -> A [beta=0.5]\n  A -> B\n}"


def test_cycle_is_rejected():
    with pytest.raises(CycleError):
        parse_dag("dag { A -> B B -> A }")


def test_self_loop_is_rejected():
    with pytest.raises(CycleError):
        parse_dag("dag { A -> A }")


def test_duplicate_edge_is_rejected():
    with pytest.raises(DagValidationError):
        parse_dag("dag { A -> B A -> B }")


def test_duplicate_declaration_is_rejected():
    with pytest.raises(DagValidationError):
        parse_dag("dag { A [latent] A [latent] }")


def test_declaration_after_use_sets_kind():
    dag = parse_dag("dag { U -> A U [latent] }")
    assert dag.node("U").kind is NodeKind.Latent


def test_unknown_node_attribute():
    with pytest.raises(UnknownAttributeError):
        parse_dag("dag { A [hidden] }")


def test_unknown_edge_attribute():
    with pytest.raises(UnknownAttributeError):
        parse_dag("dag { A -> B [weight=1] }")


def test_conflicting_kinds():
    with pytest.raises(DagSyntaxError, match="Conflicting"):
        parse_dag("dag { D [latent, deterministic] }")


def test_syntax_error_reports_position():
    with pytest.raises(DagSyntaxError) as info:
        parse_dag("dag {\n  A -> \n}")
    assert info.value.line == 3
    assert info.value.column == 1
    assert info.value.detail["line"] == 3


@pytest.mark.parametrize("text", ["", "graph { }", "dag { A -> B", "dag { A -> B } extra", "dag { A $ B }"])
def test_malformed_inputs(text):
    with pytest.raises(DagSyntaxError):
        parse_dag(text)


def test_deterministic_node_without_parents():
    with pytest.raises(DagValidationError, match="needs at least one parent"):
        parse_dag("dag { D [deterministic] }")


def test_file_round_trip(tmp_path, scenarios):
    dag = scenarios["3B+"].sem.annotated_dag()
    path = tmp_path / "3b_plus.dag"
    save_dag_file(dag, path)
    assert load_dag_file(path) == dag


def test_file_with_byte_order_mark(tmp_path):
    path = tmp_path / "bom.dag"
    path.write_bytes(b"\xef\xbb\xbfdag { A -> B }")
    assert load_dag_file(path) == parse_dag("dag { A -> B }")


def test_file_that_is_not_utf8(tmp_path):
    path = tmp_path / "latin.dag"
    path.write_bytes(b"dag { A -> B \xff }")
    with pytest.raises(UserInputError, match="Cannot read DAG file"):
        load_dag_file(path)
