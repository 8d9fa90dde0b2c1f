import random

import pytest

from domcalc import analysis
from domcalc.analysis import (
    NoIdentifier,
    NotAPart,
    NotComposite,
    check_wellformed,
    classify,
    observe_attributes,
    observe_mereology,
    observe_part_sorts,
    observe_unique_identifier,
    registry_for_model,
)
from domcalc.dsl import parse_model
from domcalc.model import DomainModel, EndurantDecl, MereoEmpty

from modelgen import random_model


def parse_ok(text):
    model, diagnostics = parse_model(text)
    assert not diagnostics, diagnostics
    return model


# -- classification ----------------------------------------------------------

def test_classify_composite_aircraft(aircraft_model):
    cls = classify(aircraft_model, "AC")
    assert cls.is_part and cls.is_composite and cls.is_discrete
    assert not (cls.is_atomic or cls.is_material or cls.is_component)


def test_classify_atomic_position(aircraft_model):
    cls = classify(aircraft_model, "PP")
    assert cls.is_part and cls.is_atomic and not cls.is_composite


def test_classify_material():
    model = DomainModel((EndurantDecl("M", "material", "continuous"),))
    cls = classify(model, "M")
    assert cls.is_material and cls.is_continuous and not cls.is_part


def test_classify_exclusivity_on_generated_models():
    for seed in range(40):
        model = random_model(random.Random(seed))
        for endurant in model.endurants:
            cls = classify(model, endurant.name)
            assert [cls.is_part, cls.is_component, cls.is_material].count(True) == 1
            assert cls.is_discrete != cls.is_continuous
            if cls.is_part:
                assert cls.is_atomic != cls.is_composite
            else:
                assert not cls.is_atomic and not cls.is_composite


# -- description prompts -----------------------------------------------------

def test_observe_part_sorts_aircraft(aircraft_model):
    description = observe_part_sorts(aircraft_model, "AC")
    values = [d.text for d in description.formal if d.kind == "value"]
    assert values == ["obs_PP: AC → PP", "obs_TD: AC → TD", "obs_DP: AC → DP"]


def test_observe_part_sorts_rejects_atomic(aircraft_model):
    with pytest.raises(NotComposite):
        observe_part_sorts(aircraft_model, "PP")


def test_observe_part_sorts_single_child():
    model = parse_ok("""
    part A composite(B) { id AI; mereo empty; }
    part B { id BI; mereo empty; }
    """)
    description = observe_part_sorts(model, "A")
    assert [d.text for d in description.formal if d.kind == "value"] == [
        "obs_B: A → B"]


def test_observe_unique_identifier(aircraft_model):
    assert "uid_PP: PP → PPI" in [
        d.text for d in observe_unique_identifier(aircraft_model, "PP").formal]
    assert "uid_TD: TD → TDI" in [
        d.text for d in observe_unique_identifier(aircraft_model, "TD").formal]


def test_observe_unique_identifier_rejects_material():
    model = DomainModel((EndurantDecl("M", "material", "continuous"),))
    with pytest.raises(NoIdentifier):
        observe_unique_identifier(model, "M")


def test_observe_mereology(aircraft_model):
    display = observe_mereology(aircraft_model, "DP")
    assert display.formal[0].text == "mereo_DP: DP → PPI×TDI"
    position = observe_mereology(aircraft_model, "PP")
    assert position.formal[0].text == "mereo_PP: PP → DPI"


def test_observe_mereology_rejects_component():
    model = DomainModel((EndurantDecl("C", "component", "discrete", id_type="CI"),))
    with pytest.raises(NotAPart):
        observe_mereology(model, "C")


def test_observe_attributes(aircraft_model):
    position = observe_attributes(aircraft_model, "PP")
    assert position.formal[0].text == "LO, LA, AL"
    dynamics = observe_attributes(aircraft_model, "TD")
    assert dynamics.formal[0].text == "VEL, ACC"
    craft = observe_attributes(aircraft_model, "AC")
    assert craft.formal == ()


# -- registry ----------------------------------------------------------------

def test_registry_for_aircraft(aircraft_model):
    registry, diagnostics = registry_for_model(aircraft_model)
    assert not diagnostics
    for name in ("rLO", "rLA", "rAL", "rVEL", "rACC",
                 "dLO", "dLA", "dAL", "dVEL", "dACC"):
        assert name in registry
    # rLO magnitudes are tenths of a degree: scale 1/10
    assert registry.get("rLO").scale.denominator == 10
    assert registry.get("dLO").scale == 1


def test_registry_unknown_source_kind():
    model = parse_ok("conversion c : nosuch -> target = affine(1, 0);")
    _, diagnostics = registry_for_model(model)
    assert "E205" in {d.code for d in diagnostics}


def test_registry_degenerate_scale():
    model = parse_ok("conversion c : m -> target = affine(0, 0);")
    _, diagnostics = registry_for_model(model)
    assert "E207" in {d.code for d in diagnostics}


def test_registry_shadowing_builtin_warns():
    model = parse_ok("conversion c : K -> Temp = affine(2, 0);")
    registry, diagnostics = registry_for_model(model)
    assert "W210" in {d.code for d in diagnostics}
    assert not any(d.is_error for d in diagnostics)
    assert registry.get("Temp").scale.denominator == 2


# -- well-formedness ---------------------------------------------------------

def test_aircraft_is_wellformed(aircraft_model):
    assert check_wellformed(aircraft_model) == []


def test_dangling_mereology_id():
    model = parse_ok("part PP { id PPI; mereo ZZI; }")
    assert "E101" in {d.code for d in check_wellformed(model)}


def cycle_oracle(model):
    # Independent oracle: a sort that can reach itself over the children
    # relation witnesses a cycle.
    children = {e.name: set(e.children or ()) for e in model.endurants}
    for start in children:
        frontier, seen = set(children[start]), set()
        while frontier:
            node = frontier.pop()
            if node == start:
                return True
            if node in seen:
                continue
            seen.add(node)
            frontier |= children.get(node, set())
    return False


def test_composite_cycle_detected():
    model = parse_ok("""
    part A composite(B) { id AI; mereo empty; }
    part B composite(A) { id BI; mereo empty; }
    """)
    assert cycle_oracle(model)
    assert "E102" in {d.code for d in check_wellformed(model)}


def test_cycle_oracle_agrees_on_acyclic(aircraft_model):
    assert not cycle_oracle(aircraft_model)
    for seed in range(20):
        assert not cycle_oracle(random_model(random.Random(seed)))


def test_unknown_composite_child():
    model = parse_ok("part A composite(NOPE) { id AI; mereo empty; }")
    assert "E103" in {d.code for d in check_wellformed(model)}


def test_shared_child_rejected():
    model = parse_ok("""
    part A composite(C) { id AI; mereo empty; }
    part B composite(C) { id BI; mereo empty; }
    part C { id CI; mereo empty; }
    """)
    assert "E117" in {d.code for d in check_wellformed(model)}


def test_axiom_target_must_be_programmable():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; }
    part B { id BI; mereo AI; attr Y : rX reactive; attr dX : m programmable init 0; }
    conversion a2rX : m -> rX = affine(1, 0);
    axiom ax { display(B.Y) tracks (A.X via a2rX); }
    """)
    assert "E110" in {d.code for d in check_wellformed(model)}


def test_axiom_chain_type_mismatch():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; }
    part B { id BI; mereo AI; attr dX : kg programmable init 0; }
    conversion a2rX : m -> rX = affine(1, 0);
    axiom ax { display(B.dX) tracks (A.X via a2rX); }
    """)
    assert "E111" in {d.code for d in check_wellformed(model)}


def test_first_link_must_not_have_inverse():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; }
    part B { id BI; mereo AI; attr dX : rX programmable init 0; }
    conversion a2rX : m -> rX inverse r2aX = affine(2, 0);
    conversion r2aX : rX -> m inverse a2rX = affine(0.5, 0);
    axiom ax { display(B.dX) tracks (A.X via a2rX); }
    """)
    assert "E113" in {d.code for d in check_wellformed(model)}


def test_later_links_must_have_inverse():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; }
    part B { id BI; mereo AI; attr dX : dXk programmable init 0; }
    conversion a2rX : m -> rX = affine(1, 0);
    conversion r2dX : rX -> dXk = affine(2, 0);
    axiom ax { display(B.dX) tracks (A.X via a2rX, r2dX); }
    """)
    assert "E114" in {d.code for d in check_wellformed(model)}


def test_asymmetric_inverse_pairing():
    model = parse_ok("""
    conversion f : m -> q1 inverse g = affine(2, 0);
    conversion g : q1 -> m = affine(0.5, 0);
    """)
    assert "E115" in {d.code for d in check_wellformed(model)}


def test_missing_init_is_checked_before_compile():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; }
    part B { id BI; mereo AI; attr dX : rX programmable; }
    conversion a2rX : m -> rX = affine(1, 0);
    axiom ax { display(B.dX) tracks (A.X via a2rX); }
    """)
    assert "E303" in {d.code for d in check_wellformed(model)}


def test_wellformed_implies_compilable():
    from domcalc import compiler
    for seed in range(40):
        model = random_model(random.Random(seed))
        assert check_wellformed(model) == []
        compiler.compile_model(model)  # must not raise


def test_description_idempotence_generated():
    for seed in range(25):
        model = random_model(random.Random(seed))
        for endurant in model.endurants:
            prompts = []
            cls = classify(model, endurant.name)
            if cls.is_composite:
                prompts.append(observe_part_sorts)
            if not cls.is_material:
                prompts.append(observe_unique_identifier)
            if cls.is_part:
                prompts.append(observe_mereology)
            prompts.append(observe_attributes)
            for prompt in prompts:
                source = prompt(model, endurant.name).source
                fragment, diagnostics = parse_model(source)
                assert not diagnostics, source
                assert check_wellformed(fragment) == [], source


def test_external_channel_form_cannot_carry_tuples():
    model = parse_ok("""
    part A { id AI; mereo empty; attr X : m reactive; }
    channel attr_X_ch : m x kg;
    """)
    assert "E304" in {d.code for d in check_wellformed(model)}


def test_external_channel_must_name_an_attribute():
    model = parse_ok("""
    part A { id AI; mereo empty; }
    channel attr_NOPE_ch : m;
    """)
    assert "E112" in {d.code for d in check_wellformed(model)}


def test_axiom_arity_mismatch():
    model = parse_ok("""
    part A { id AI; mereo BI; attr X : m reactive; attr Y : m reactive; }
    part B { id BI; mereo AI; attr dX : rX programmable init 0; }
    conversion a2rX : m -> rX = affine(1, 0);
    axiom ax { display(B.dX) tracks (A.X via a2rX; A.Y via a2rX); }
    """)
    assert "E112" in {d.code for d in check_wellformed(model)}


def test_mereology_must_reference_part_identifiers():
    model = parse_ok("""
    part A { id AI; mereo CI; }
    component C { id CI; }
    """)
    assert "E119" in {d.code for d in check_wellformed(model)}


def test_inconsistent_kind_derivation_warns():
    model = parse_ok("""
    conversion f : m -> q inverse g = affine(2, 0);
    conversion g : q -> m inverse f = affine(0.25, 0);
    """)
    _, diagnostics = registry_for_model(model)
    assert "W211" in {d.code for d in diagnostics}
    assert not any(d.is_error for d in diagnostics)
