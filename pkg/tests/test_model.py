import pytest

from conftest import local_fixture
from reckon.model import (
    Callsite,
    ClassDef,
    ClassHierarchy,
    DirectCall,
    FunctionSignature,
    InvalidModelError,
    Member,
    ProgramModel,
    all_functions,
    all_virtual_functions,
    derived_closure,
    validate,
)


def test_car_validates(car):
    assert validate(car) == []


@pytest.mark.parametrize("clause", ["i", "ii", "iii", "iv", "v", "vi", "vii"])
def test_each_clause_fixture_reports_only_its_clause(clause):
    violations = validate(local_fixture(f"clause_{clause}"))
    assert [v.clause for v in violations] == [clause]


def test_violation_renders_tab_separated():
    (v,) = validate(local_fixture("clause_i"))
    assert str(v) == "i\tX\tclass lists itself as a base"


def test_closure_contains_car_edges(car):
    closure = derived_closure(car.hierarchy)
    assert {("HybrideCar", "Car"), ("ElectricCar", "Car"), ("HybrideCar", "ElectricCar")} <= closure
    assert ("Car", "HybrideCar") not in closure


def test_closure_trivial_cases():
    single = ClassHierarchy((ClassDef("C"),))
    assert derived_closure(single) == {("C", "C")}
    assert derived_closure(ClassHierarchy()) == set()


def test_closure_rejects_invalid_hierarchy():
    with pytest.raises(InvalidModelError):
        derived_closure(local_fixture("cyclic").hierarchy)


def test_function_baselines(car, listing1):
    named = lambda fs: {f.name for f in fs if not f.is_destructor}
    assert len(named(all_functions(car))) == 5
    assert len(named(all_virtual_functions(car))) == 3
    # The fixture also declares the virtual destructor, which counts once more.
    assert len(all_functions(car)) == 6
    assert len(all_virtual_functions(car)) == 4
    assert len(all_virtual_functions(listing1)) == 5
    assert all_functions(ProgramModel()) == []


def test_refs_disambiguate_overloads():
    c = ClassDef("C", members=(
        Member("C", "f", FunctionSignature(("int",))),
        Member("C", "f", FunctionSignature(("int*", "bool"))),
        Member("C", "g"),
    ))
    model = ProgramModel("m", ClassHierarchy((c,)), (Member("", "free"),))
    assert [model.ref(m) for m in model.functions] == ["C::f(int)", "C::f(int*,bool)", "C::g", "free"]
    assert model.function("C::g()").name == "g"
    assert model.function("C::f(int)").param_types == ("int",)


def test_validate_order_independent(car):
    flipped = ProgramModel(car.name, ClassHierarchy(tuple(reversed(car.hierarchy.classes))),
                           car.free_functions, car.callsites, car.direct_calls)
    assert validate(flipped) == validate(car) == []


def test_unknown_direct_callee_is_reported(listing1):
    bad = ProgramModel("bad", listing1.hierarchy, (), (), (DirectCall("a.cpp:1:1", "Nope::get"),))
    assert [(v.clause, v.entity) for v in validate(bad)] == [("ref", "a.cpp:1:1")]


def test_unresolvable_callsites_are_reported(listing1):
    bad = ProgramModel("bad", listing1.hierarchy, (),
                        (Callsite("x", static_receiver_type="Nope", member_name="get"),
                         Callsite("y", static_receiver_type="Bar", member_name="missing")))
    entities = [v.entity for v in validate(bad)]
    assert entities == ["x", "y"]
