import json
import math
import random

import pytest

from jaguar import (
    DatabaseInstance,
    EngineConfig,
    InvariantError,
    Relation,
    Universe,
    ValidationError,
    baseline_single_td,
    brute_force,
    decomposition_family,
    default_stats,
    equal_degree_partition,
    evaluate,
    gen_square,
    heavy_light_partition,
    parse_query,
    potential,
    yannakakis,
)
from jaguar.calibration import WorkMeter

from conftest import make_relation, random_instance, stats_for


class TestHeavyLightPartition:
    @pytest.fixture
    def rel(self):
        universe = Universe(("X", "Y"))
        return make_relation(
            universe, ("X", "Y"), [("1", "1"), ("1", "2"), ("1", "3"), ("2", "1")]
        )

    def test_splits_by_group_size(self, rel):
        on = rel.schema.universe.varset(["X"])
        heavy, light = heavy_light_partition(rel, on, 2.0)
        assert heavy.rows == {("1", "1"), ("1", "2"), ("1", "3")}
        assert light.rows == {("2", "1")}

    def test_high_threshold_all_light(self, rel):
        on = rel.schema.universe.varset(["X"])
        heavy, light = heavy_light_partition(rel, on, 3.0)
        assert len(heavy) == 0
        assert light == rel

    def test_zero_threshold_all_heavy(self, rel):
        on = rel.schema.universe.varset(["X"])
        heavy, light = heavy_light_partition(rel, on, 0.0)
        assert heavy == rel
        assert len(light) == 0


class TestEqualDegreePartition:
    def test_chunks_in_sorted_order(self):
        universe = Universe(("X", "Y"))
        rel = make_relation(universe, ("X", "Y"), [("1", "1"), ("1", "2"), ("2", "1")])
        on = universe.varset(["X"])
        parts = equal_degree_partition(rel, on, 1.0, 2)
        assert parts[0].rows == {("1", "1"), ("2", "1")}
        assert parts[1].rows == {("1", "2")}

    def test_wide_cap_uses_one_part(self):
        universe = Universe(("X", "Y"))
        rel = make_relation(universe, ("X", "Y"), [("1", "1"), ("1", "2"), ("2", "1")])
        on = universe.varset(["X"])
        parts = equal_degree_partition(rel, on, 2.0, 3)
        assert parts[0] == rel
        assert all(len(p) == 0 for p in parts[1:])

    def test_empty_relation(self):
        universe = Universe(("X", "Y"))
        rel = make_relation(universe, ("X", "Y"), [])
        parts = equal_degree_partition(rel, universe.varset(["X"]), 1.0, 3)
        assert len(parts) == 3
        assert all(len(p) == 0 for p in parts)

    def test_partition_is_exact(self):
        universe = Universe(("X", "Y"))
        rng = random.Random(5)
        rows = {(str(rng.randint(1, 4)), str(rng.randint(1, 30))) for _ in range(40)}
        rel = make_relation(universe, ("X", "Y"), rows)
        on = universe.varset(["X"])
        theta = 2.6
        max_group = max(len(v) for v in rel.groups(on).values())
        k = max(4, -(-max_group // 2))
        parts = equal_degree_partition(rel, on, theta, k)
        recombined = set()
        for part in parts:
            assert not (recombined & part.rows)
            recombined |= part.rows
            for group in part.groups(on).values():
                assert len(group) <= 2  # floor(2.6)
        assert recombined == rel.rows

    def test_overfull_group_is_an_invariant_error(self):
        universe = Universe(("X", "Y"))
        rel = make_relation(universe, ("X", "Y"), [("1", str(i)) for i in range(6)])
        with pytest.raises(InvariantError):
            equal_degree_partition(rel, universe.varset(["X"]), 1.0, 3)


class TestYannakakis:
    def test_matches_brute_force_on_materialized_bags(self, queries):
        q = queries["4cycle_full"]
        u = q.universe
        inst = gen_square(6, universe=u)
        family = decomposition_family(q)
        td = next(
            t for t in family if frozenset(b.members for b in t.bags)
            == frozenset({("X", "Y", "Z"), ("X", "Z", "W")})
        )
        answers = baseline_single_td(q, inst, td)
        assert answers.rows == brute_force(q, inst).rows

    def test_boolean_query_yields_unit(self):
        q = parse_query("Q() :- R(X,Y), S(Y,Z).")
        u = q.universe
        r = make_relation(u, ("X", "Y"), [("1", "1")], "R")
        s = make_relation(u, ("Y", "Z"), [("1", "2")], "S")
        inst = DatabaseInstance(u, [r, s])
        td = next(t for t in decomposition_family(q) if len(t.bags) == 2)
        rows = yannakakis(td, inst, q.free)
        assert rows == {()}

    def test_empty_bag_gives_empty(self):
        q = parse_query("Q() :- R(X,Y), S(Y,Z).")
        u = q.universe
        r = make_relation(u, ("X", "Y"), [("1", "1")], "R")
        s = make_relation(u, ("Y", "Z"), [("2", "2")], "S")  # no match on Y
        inst = DatabaseInstance(u, [r, s])
        td = next(t for t in decomposition_family(q) if len(t.bags) == 2)
        assert yannakakis(td, inst, q.free) == frozenset()

    def test_semijoins_against_non_bag_relations_filter(self):
        # a unary relation outside the bags must still constrain the output
        q = parse_query("Q(X,Y) :- R(X,Y).")
        u = q.universe
        r = make_relation(u, ("X", "Y"), [("1", "1"), ("2", "2")], "R")
        filt = make_relation(u, ("X",), [("1",)], "F")
        inst = DatabaseInstance(u, [r, filt])
        td = decomposition_family(q)[0]
        rows = yannakakis(td, inst, q.free)
        assert rows == {("1", "1")}


class TestPotential:
    def test_no_relations(self):
        universe = Universe(("X", "Y", "Z", "W"))
        inst = DatabaseInstance(universe, [])
        assert potential(inst, 10, 4) == pytest.approx(16 * 5)

    def test_adding_full_size_relation_drops_by_four(self):
        universe = Universe(("X", "Y", "Z", "W"))
        rel = make_relation(universe, ("X",), [(str(i),) for i in range(10)], "R")
        inst = DatabaseInstance(universe, [rel])
        assert potential(inst, 10, 4) == pytest.approx(16 * 5 - 4)

    def test_nullary_contributes_zero(self):
        universe = Universe(("X", "Y", "Z", "W"))
        inst = DatabaseInstance(universe, [Relation.nullary(universe)])
        assert potential(inst, 10, 4) == pytest.approx(16 * 5 - 5)


class TestEvaluateGoldens:
    def test_skewed_square_m6(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(6, universe=q.universe)
        stats = default_stats(q, inst, inst.size)
        answers, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert answers.rows == brute_force(q, inst).rows
        root = trace.nodes[0]
        # N = 20 here, so the root violation level is log_20 5
        assert root.c == pytest.approx(math.log(5) / math.log(20))
        assert root.theta == pytest.approx(1.0)
        # at this scale no group exceeds theta * N**0.5, so nothing is heavy
        assert root.heavy_size == 0

    def test_skewed_square_m16_isolates_one_heavy_value(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(16, universe=q.universe)
        stats = default_stats(q, inst, inst.size)
        answers, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert answers.rows == brute_force(q, inst).rows
        root = trace.nodes[0]
        # the degree-8 value is the single heavy group: 8 > theta * 60**0.5
        assert root.heavy_size == 8
        assert root.light_size == 15 - 8
        heavy_child = next(
            n for n in trace.nodes if n.parent == root.id and n.edge == "heavy"
        )
        assert heavy_child.join_out == 1  # one heavy value projected

    def test_boolean_four_cycle(self, queries):
        q = queries["4cycle_bool"]
        inst = gen_square(6, universe=q.universe)
        stats = default_stats(q, inst, inst.size)
        answers, _ = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert answers.rows == {()}

    def test_empty_base_relation_short_circuits(self, queries):
        q = queries["2path_proj"]
        u = q.universe
        r = make_relation(u, ("X", "Y"), [("1", "1")], "R")
        s = make_relation(u, ("Y", "Z"), [], "S")
        inst = DatabaseInstance(u, [r, s])
        stats = default_stats(q, None, 0, classic=True)
        answers, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert len(answers) == 0
        assert len(trace.nodes) == 1
        assert trace.nodes[0].status == "fallback"

    def test_tiny_instance_falls_back(self):
        q = parse_query("Q(X,Y) :- R(X,Y).")
        u = q.universe
        inst = DatabaseInstance(u, [make_relation(u, ("X", "Y"), [("1", "1")], "R")])
        stats = default_stats(q, None, 0, classic=True)
        answers, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert answers.rows == {("1", "1")}
        assert trace.nodes[0].status == "fallback"


class TestEvaluateProperties:
    def test_matches_brute_force_small_sweep(self, queries):
        for name, q in queries.items():
            for seed in range(3):
                inst = random_instance(q, seed=7000 + seed, size_hi=25)
                stats = stats_for(q, inst)
                expected = brute_force(q, inst).rows
                for eps in (0.4, 1.0):
                    answers, _ = evaluate(q, stats, inst, EngineConfig(epsilon=eps))
                    assert answers.rows == expected, (name, seed, eps)

    def test_deterministic(self, queries):
        q = queries["4cycle_full"]
        inst = random_instance(q, seed=4242)
        stats = stats_for(q, inst)
        a1, t1 = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        a2, t2 = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert a1 == a2
        assert t1.to_json() == t2.to_json()

    def test_partition_disjointness_recorded(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(16, universe=q.universe)
        stats = stats_for(q, inst)
        _, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        for node in trace.branching_nodes():
            assert sum(node.part_sizes) == node.light_size

    def test_answers_are_sorted_and_streamable(self, queries):
        q = queries["2path_proj"]
        inst = random_instance(q, seed=99)
        stats = stats_for(q, inst)
        answers, _ = evaluate(q, stats, inst, EngineConfig())
        listed = list(answers)
        assert listed == sorted(answers.rows)
        assert all(row in answers for row in listed)

    def test_depth_guard_trips_as_invariant_error(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(16, universe=q.universe)
        stats = stats_for(q, inst)
        with pytest.raises(InvariantError, match="depth"):
            evaluate(q, stats, inst, EngineConfig(epsilon=0.5, max_depth=0))

    def test_bad_epsilon_rejected(self):
        with pytest.raises(ValidationError):
            EngineConfig(epsilon=0.0)

    def test_variable_limit(self, queries):
        q = queries["5cycle_full"]
        inst = random_instance(q, seed=1, size_hi=8)
        stats = stats_for(q, inst)
        from jaguar.errors import LimitError

        with pytest.raises(LimitError):
            evaluate(q, stats, inst, EngineConfig(max_vars=4))

    def test_unsatisfied_stats_rejected(self, queries):
        q = queries["2path_proj"]
        inst = random_instance(q, seed=31)
        lying = default_stats(q, inst, inst.size)
        doctored = type(lying)(
            tuple(
                type(t)(
                    targets=t.targets,
                    given=t.given,
                    exponent=0.0,
                    guard_name=t.guard_name,
                    guard_schema=t.guard_schema,
                )
                for t in lying
            )
        )
        with pytest.raises(ValidationError, match="satisfy"):
            evaluate(q, doctored, inst, EngineConfig())


class TestTraceSerialization:
    def test_schema_fields(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(8, universe=q.universe)
        stats = stats_for(q, inst)
        _, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        payload = json.loads(trace.to_json())
        assert set(payload) == {"nodes"}
        keys = {
            "id", "parent", "edge", "light_index", "c", "X", "Y", "W",
            "theta", "I_size", "join_out", "terminal_td",
        }
        for node in payload["nodes"]:
            assert set(node) == keys
        root = payload["nodes"][0]
        assert root["parent"] is None
        assert root["edge"] == "root"
        branching = [n for n in payload["nodes"] if n["c"] is not None]
        assert branching, "expected at least one branching node"
        assert all(isinstance(n["X"], list) for n in branching)

    def test_children_shape(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(16, universe=q.universe)
        stats = stats_for(q, inst)
        _, trace = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        kids = trace.children()
        k_min = math.ceil(inst.size**0.5 - 1e-9)
        for node in trace.branching_nodes():
            mine = kids.get(node.id, [])
            heavies = [n for n in mine if n.edge == "heavy"]
            lights = [n for n in mine if n.edge == "light"]
            assert len(heavies) == 1
            assert len(lights) >= k_min
            assert [n.light_index for n in lights] == list(range(1, len(lights) + 1))


class TestBaseline:
    def test_baseline_equals_engine(self, queries):
        q = queries["4cycle_full"]
        inst = gen_square(8, universe=q.universe)
        family = decomposition_family(q)
        td = next(t for t in family if len(t.bags) == 2)
        stats = stats_for(q, inst)
        engine_rows = evaluate(q, stats, inst, EngineConfig())[0].rows
        meter = WorkMeter()
        baseline_rows = baseline_single_td(q, inst, td, meter=meter).rows
        assert baseline_rows == engine_rows
        assert meter.produced > 0

    def test_bag_without_atom_rejected(self, queries):
        q = queries["triangle"]
        u = q.universe
        inst = random_instance(q, seed=5, size_hi=10)
        from jaguar.decompositions import TreeDecomposition

        td = TreeDecomposition(
            u, (u.varset(["X"]), u.full), ((0, 1),), (1,)
        )
        with pytest.raises(ValidationError):
            baseline_single_td(q, inst, td)


class TestFunctionalDependencyStats:
    def test_engine_with_fd_statistics_matches_oracle(self, queries):
        # a statistics term with a conditioned side makes calibration
        # materialize guard joins inside the recursion, a path plain size
        # caps never reach
        q = queries["4cycle_full"]
        u = q.universe
        rng = random.Random(4021)
        rows_r = {(str(rng.randint(1, 9)), str(rng.randint(1, 9))) for _ in range(25)}
        s_rows = {(str(y), str((y * 3) % 9 + 1)) for y in range(1, 10)}  # Z = f(Y)
        rows_t = {(str(rng.randint(1, 9)), str(rng.randint(1, 9))) for _ in range(25)}
        rows_u = {(str(rng.randint(1, 9)), str(rng.randint(1, 9))) for _ in range(25)}
        inst = DatabaseInstance(
            u,
            [
                make_relation(u, ("X", "Y"), rows_r, "R"),
                make_relation(u, ("Y", "Z"), s_rows, "S"),
                make_relation(u, ("Z", "W"), rows_t, "T"),
                make_relation(u, ("W", "X"), rows_u, "U"),
            ],
        )
        from jaguar import StatisticsSpec, StatTerm

        base = default_stats(q, inst, inst.size)
        fd = StatTerm(
            targets=u.varset(["Z"]),
            given=u.varset(["Y"]),
            exponent=0.0,
            guard_name="S",
            guard_schema=u.varset(["Y", "Z"]),
        )
        stats = StatisticsSpec(base.terms + (fd,))
        expected = brute_force(q, inst).rows
        for eps in (0.3, 0.5, 1.0):
            answers, trace = evaluate(q, stats, inst, EngineConfig(epsilon=eps))
            assert answers.rows == expected, eps
            for node in trace.branching_nodes():
                assert node.c is not None

    def test_parsed_fd_round_trip(self, queries):
        q = queries["4cycle_full"]
        u = q.universe
        s_rows = [(str(y), str(y)) for y in range(1, 6)]
        rels = []
        for name, schema in q.atoms:
            if name == "S":
                rels.append(make_relation(u, schema.members, s_rows, name))
            else:
                rels.append(
                    make_relation(
                        u, schema.members, [(str(i), str(i)) for i in range(1, 6)], name
                    )
                )
        inst = DatabaseInstance(u, rels)
        from jaguar import parse_stats

        stats = parse_stats("deg(S; Z|Y) <= 1", inst, inst.size, u)
        answers, _ = evaluate(q, stats, inst, EngineConfig(epsilon=0.5))
        assert answers.rows == brute_force(q, inst).rows
