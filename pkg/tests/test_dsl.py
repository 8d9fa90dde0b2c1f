import random

from hypothesis import given, settings, strategies as st

from domcalc import analysis
from domcalc.dsl import parse_model, print_model
from domcalc.model import MereoEmpty, MereoId, MereoProduct

from modelgen import random_model


def test_aircraft_corpus_structure(aircraft_model):
    model = aircraft_model
    assert [e.name for e in model.endurants] == ["AC", "PP", "TD", "DP"]
    ac = model.endurant("AC")
    assert ac.children == ("PP", "TD", "DP")
    assert model.endurant("PP").mereology == MereoId("DPI")
    assert model.endurant("TD").mereology == MereoId("DPI")
    assert model.endurant("DP").mereology == MereoProduct(("PPI", "TDI"))
    pp = model.endurant("PP")
    assert [(a.name, a.category) for a in pp.attributes] == [
        ("LO", "reactive"), ("LA", "reactive"), ("AL", "reactive")]
    td = model.endurant("TD")
    assert [a.name for a in td.attributes] == ["VEL", "ACC"]
    dp = model.endurant("DP")
    assert [a.name for a in dp.attributes] == ["dLO", "dLA", "dAL", "dVEL", "dACC"]
    assert all(a.category == "programmable" for a in dp.attributes)
    assert len(model.conversions) == 15
    assert len(model.axioms) == 1


def test_empty_file():
    model, diagnostics = parse_model("")
    assert model.is_empty
    assert diagnostics == []
    assert print_model(model) == ""


def test_duplicate_id_reported():
    _, diagnostics = parse_model("part PP { id PPI; id PPI2; mereo empty; }")
    assert [d.code for d in diagnostics] == ["E002"]


def test_duplicate_sorts_reported():
    text = """
    part PP { id PPI; mereo empty; }
    part PP { id QQI; mereo empty; }
    """
    _, diagnostics = parse_model(text)
    assert "E002" in {d.code for d in diagnostics}


def test_single_atomic_part_prints_one_block():
    model, diagnostics = parse_model("part PP { id PPI; mereo empty; }")
    assert not diagnostics
    text = print_model(model)
    assert text == "part PP {\n  id PPI;\n  mereo PP -> empty;\n}\n"


def test_print_contains_display_mereology(aircraft_model):
    assert "mereo DP -> PPI x TDI" in print_model(aircraft_model)


def test_roundtrip_aircraft(aircraft_model):
    reparsed, diagnostics = parse_model(print_model(aircraft_model))
    assert not diagnostics
    assert reparsed == aircraft_model


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_roundtrip_generated_models(seed):
    model = random_model(random.Random(seed))
    reparsed, diagnostics = parse_model(print_model(model))
    assert not diagnostics
    assert reparsed == model


def test_recovery_reports_multiple_errors():
    text = """
    part A { id AI; mereo empty; }
    part { broken
    part B { id BI; mereo empty; }
    channel ;
    part C { id CI; mereo empty; }
    """
    model, diagnostics = parse_model(text)
    assert len([d for d in diagnostics if d.code == "E001"]) >= 2
    assert {e.name for e in model.endurants} >= {"A", "C"}


def test_diagnostic_spans_inside_input():
    text = "part A {\n  id AI;\n  bogus;\n}\n"
    _, diagnostics = parse_model(text, file="t.dom")
    assert diagnostics
    lines = text.splitlines()
    for diag in diagnostics:
        assert diag.span.file == "t.dom"
        assert 1 <= diag.span.start_line <= len(lines)
        assert 1 <= diag.span.start_col <= len(lines[diag.span.start_line - 1]) + 1


def test_mereology_sort_prefix_must_match():
    _, diagnostics = parse_model("part A { id AI; mereo B -> AI; }")
    assert "E003" in {d.code for d in diagnostics}


def test_comments_and_doc_strings():
    text = """
    -- a line comment
    part A { doc "a \\"quoted\\" note"; id AI; mereo empty; } -- trailing
    """
    model, diagnostics = parse_model(text)
    assert not diagnostics
    assert model.endurant("A").doc == 'a "quoted" note'
    reparsed, _ = parse_model(print_model(model))
    assert reparsed == model


def test_mereology_set_form():
    model, diagnostics = parse_model(
        "part A { id AI; mereo set(BI); } part B { id BI; mereo empty; }")
    assert not diagnostics
    assert model.endurant("A").mereology.leaves() == ("BI",)
    assert "mereo A -> set(BI)" in print_model(model)


def test_bad_character_is_a_diagnostic_not_a_crash():
    model, diagnostics = parse_model("part A { id AI; mereo empty; } @")
    assert any(d.code == "E001" for d in diagnostics)
    assert model.endurant("A") is not None


def test_described_fragments_reparse(aircraft_model):
    # Idempotence on the corpus: prompt output re-parses and re-validates.
    for sort in ("AC", "PP", "TD", "DP"):
        for prompt in (analysis.observe_unique_identifier,
                       analysis.observe_mereology,
                       analysis.observe_attributes):
            source = prompt(aircraft_model, sort).source
            fragment, diagnostics = parse_model(source)
            assert not diagnostics, source
            assert analysis.check_wellformed(fragment) == []


def test_kitchen_sink_roundtrip():
    text = """
    part RT composite(A, B) { id RTI; mereo empty; }
    part A {
      doc "producer";
      behaviour alpha;
      id AI;
      mereo A -> set(BI);
      attr X : point m autonomous;
      attr S : kg static init 2.5;
    }
    part B { id BI; mereo AI; attr dX : point m programmable init 0; attr BD : m biddable init 1; }
    component CMP { id CMPI; }
    material GAS { doc "fuel"; }
    channel alpha_b_ch : point m;
    axiom ax { display(B.dX) tracks (A.X); }
    """
    model, diagnostics = parse_model(text)
    assert not diagnostics
    printed = print_model(model)
    reparsed, rediag = parse_model(printed)
    assert not rediag
    assert reparsed == model
    assert print_model(reparsed) == printed


def test_rational_affine_coefficients_roundtrip():
    from fractions import Fraction
    text = "conversion c : m -> q = affine(5/18, -1/3);"
    model, diagnostics = parse_model(text)
    assert not diagnostics
    conv = model.conversions[0]
    assert conv.scale == Fraction(5, 18) and conv.offset == Fraction(-1, 3)
    reparsed, _ = parse_model(print_model(model))
    assert reparsed == model
