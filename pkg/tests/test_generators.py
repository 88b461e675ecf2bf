import pytest

from jaguar import (
    DatabaseInstance,
    LimitError,
    ValidationError,
    brute_force,
    degree,
    gen_random,
    gen_square,
    parse_query,
    satisfaction_count,
)

from conftest import make_relation, random_instance


class TestBruteForce:
    def test_agrees_with_satisfaction_counting(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(6, universe=q.universe)
        assert brute_force(q, inst) == satisfaction_count(q, inst)

    def test_agrees_on_random_instances(self, queries):
        for name in ("triangle", "2path_proj"):
            q = queries[name]
            for seed in range(4):
                inst = random_instance(q, seed=800 + seed, size_hi=12, domain=5)
                assert brute_force(q, inst) == satisfaction_count(q, inst), (name, seed)

    def test_boolean_satisfiable(self, queries):
        q = queries["4cycle_bool"]
        inst = gen_square(4, universe=q.universe)
        assert brute_force(q, inst).rows == {()}

    def test_empty_relation_gives_empty(self):
        q = parse_query("Q(X) :- R(X,Y), S(Y).")
        u = q.universe
        inst = DatabaseInstance(
            u,
            [
                make_relation(u, ("X", "Y"), [("1", "1")], "R"),
                make_relation(u, ("Y",), [], "S"),
            ],
        )
        assert len(brute_force(q, inst)) == 0

    def test_budget(self, queries):
        q = queries["triangle"]
        inst = random_instance(q, seed=3, size_lo=10, size_hi=10)
        with pytest.raises(LimitError):
            brute_force(q, inst, budget=10)

    def test_projection_dedupes(self):
        q = parse_query("Q(X) :- R(X,Y).")
        u = q.universe
        inst = DatabaseInstance(
            u, [make_relation(u, ("X", "Y"), [("1", "1"), ("1", "2")], "R")]
        )
        assert brute_force(q, inst).rows == {("1",)}


class TestGenSquare:
    def test_m4(self):
        inst = gen_square(4)
        assert inst.size == 12
        for rel in inst:
            assert rel.rows == {("1", "1"), ("2", "1"), ("1", "2")}

    def test_m2_degenerate(self):
        inst = gen_square(2)
        assert inst.size == 4
        for rel in inst:
            assert rel.rows == {("1", "1")}

    def test_m100_degree_profile(self):
        inst = gen_square(100)
        u = inst.universe
        for rel in inst:
            assert len(rel) == 99
            for var in rel.schema.members:
                on = u.varset([var])
                groups = rel.groups(on)
                assert len(groups[("1",)]) == 50
                others = [len(v) for k, v in groups.items() if k != ("1",)]
                assert all(n == 1 for n in others)
                assert degree(rel, rel.schema - on, on) == 50

    def test_odd_m_rejected(self):
        with pytest.raises(ValidationError):
            gen_square(5)
        with pytest.raises(ValidationError):
            gen_square(0)

    def test_schema_names(self):
        inst = gen_square(4)
        names = {rel.name for rel in inst}
        assert names == {"R", "S", "T", "U"}


class TestGenRandom:
    def test_deterministic(self):
        schemas = [("R", ("X", "Y"))]
        a = gen_random(1, schemas, [5], 10)
        b = gen_random(1, schemas, [5], 10)
        (rel_a,) = list(a)
        (rel_b,) = list(b)
        assert rel_a.rows == rel_b.rows
        assert len(rel_a) == 5

    def test_full_cross_product(self):
        schemas = [("R", ("X", "Y"))]
        inst = gen_random(7, schemas, [9], 3)
        (rel,) = list(inst)
        assert len(rel) == 9
        assert rel.rows == {(str(i), str(j)) for i in range(1, 4) for j in range(1, 4)}

    def test_infeasible_size(self):
        with pytest.raises(LimitError):
            gen_random(1, [("R", ("X",))], [10], 3)

    def test_shared_variable_fixture_is_stable(self):
        schemas = [("R", ("X", "Y")), ("S", ("Y", "Z"))]
        first = gen_random(42, schemas, [20, 20], 8)
        second = gen_random(42, schemas, [20, 20], 8)
        assert [r.rows for r in first] == [r.rows for r in second]
        assert first.size == 40
