import pytest

from reckon.model import ClassDef, ClassHierarchy, Member, all_virtual_functions
from reckon.modelio import SyntheticSpec, generate_synthetic
from reckon.vtables import (
    build_vtables,
    class_paths,
    min_vtable_path,
    primary_descent,
    vtable_paths,
    vtable_set,
    vtable_sub_hierarchy,
)


def resolved(model, table):
    return [model.ref(e.resolved_member) for e in table.entries]


def test_car_table_members(car):
    vth = build_vtables(car.hierarchy)
    named = {car.ref(m) for m in vth.members() if not m.is_destructor}
    assert named == {"Car::driverless", "ElectricCar::accelerateQuietly", "PetrolCar::produceNitrogenOxides"}
    assert {car.ref(m) for m in vth.members() if m.is_destructor} == {"Car::~Car"}


def test_listing1_slots(listing1):
    vth = build_vtables(listing1.hierarchy)
    (bar,) = vtable_set(vth, listing1.hierarchy, "Bar")
    assert resolved(listing1, bar) == ["Bar::get"]
    (bac,) = vtable_set(vth, listing1.hierarchy, "Bac")
    assert [(e.index, listing1.ref(e.resolved_member)) for e in bac.entries] == [(0, "Bac::get"), (1, "Bac::set")]
    assert {t.root_type for t in vth} == {"Foo"}


def test_no_virtual_members_no_tables():
    h = ClassHierarchy((ClassDef("A", members=(Member("A", "f"),)), ClassDef("B", ("A",))))
    assert len(build_vtables(h)) == 0


def test_vtable_sets(car, listing1):
    vth = build_vtables(car.hierarchy)
    assert len(vtable_set(vth, car.hierarchy, "HybrideCar")) == 2
    assert len(vtable_set(build_vtables(listing1.hierarchy), listing1.hierarchy, "Foo")) == 1
    h = ClassHierarchy((ClassDef("Plain"),))
    assert vtable_set(build_vtables(h), h, "Plain") == []
    with pytest.raises(KeyError):
        vtable_set(vth, car.hierarchy, "Boat")


def test_sub_hierarchy_and_primary_descent(listing1, car):
    vth = build_vtables(listing1.hierarchy)
    bar = vth.by_class["Bar"][0]
    assert [t.owning_class for t in vtable_sub_hierarchy(vth, bar)] == ["Bar", "Baz", "Bac"]
    assert [t.owning_class for t in primary_descent(vth, bar)] == ["Bar", "Baz"]
    leaf = vth.by_class["Baz"][0]
    assert vtable_sub_hierarchy(vth, leaf) == [leaf]

    cvth = build_vtables(car.hierarchy)
    below_car = vtable_sub_hierarchy(cvth, cvth.by_class["Car"][0])
    assert {t.owning_class for t in below_car} == {"Car", "ElectricCar", "PetrolCar", "HybrideCar"}


def test_car_paths(car):
    assert class_paths(car.hierarchy) == {
        ("Car", "ElectricCar"), ("Car", "ElectricCar", "HybrideCar"), ("ElectricCar", "HybrideCar"),
        ("Car", "PetrolCar"), ("Car", "PetrolCar", "HybrideCar"), ("PetrolCar", "HybrideCar"),
    }
    vth = build_vtables(car.hierarchy)
    assert vtable_paths(vth) == {("ElectricCar", "HybrideCar"), ("PetrolCar", "HybrideCar")}
    assert vtable_paths(vth) <= class_paths(car.hierarchy)
    assert class_paths(ClassHierarchy((ClassDef("C"),))) == set()


def test_min_vtable_path(car, listing1):
    vth = build_vtables(listing1.hierarchy)
    assert min_vtable_path(vth, "Foo") == ("Foo", "Bar", "Bac")
    assert min_vtable_path(vth, "Baz") == ("Baz",)
    cvth = build_vtables(car.hierarchy)
    assert min_vtable_path(cvth, "Car") == ("Car", "ElectricCar", "HybrideCar")
    with pytest.raises(KeyError):
        min_vtable_path(cvth, "Nope")


@pytest.mark.parametrize("seed", range(25))
def test_structural_invariants(seed):
    model = generate_synthetic(seed, SyntheticSpec(class_count=25, callsite_count=0))
    h = model.hierarchy
    vth = build_vtables(h)
    virtual = set(all_virtual_functions(model))
    assert vth.members() <= virtual
    assert {t.owning_class for t in vth} == set(h.virtual_classes)
    first_index = {}
    for t in vth:
        assert [e.index for e in t.entries] == list(range(len(t.entries)))
        for e in t.entries:
            assert first_index.setdefault(e.slot, e.index) == e.index
            assert h.derives(e.resolved_member.owning_class, e.declaring_class)
    assert vtable_paths(vth) <= class_paths(h)
    assert sorted(x for island in vth.islands for x in island) == sorted(t.id for t in vth)
