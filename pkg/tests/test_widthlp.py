import math
import random

import numpy as np
import pytest

from jaguar import (
    StatisticsSpec,
    StatTerm,
    check_polymatroid,
    decomposition_family,
    satisfies_stats,
    shannon_constraints,
    solve_selector_lp,
    subw,
)
from jaguar.setfunctions import SetFunction
from jaguar.widthlp import LinearProgram, lp_solve

scipy_opt = pytest.importorskip("scipy.optimize")


def classic_stats(query):
    from jaguar import default_stats

    return default_stats(query, None, 0, classic=True)


def term(universe, targets, given, exponent, guard=None):
    t = universe.varset(targets)
    x = universe.varset(given)
    return StatTerm(
        targets=t,
        given=x,
        exponent=exponent,
        guard_name=guard or "G",
        guard_schema=t | x,
    )


class TestShannonConstraints:
    @pytest.mark.parametrize(
        "nvars,expected",
        [(1, 2), (2, 4), (3, 1 + 3 + 3 * 2), (4, 1 + 4 + 6 * 4)],
    )
    def test_counts(self, nvars, expected):
        assert len(shannon_constraints(nvars)) == expected

    def test_two_variable_expansion(self):
        rows = shannon_constraints(2)
        kinds = [r.kind for r in rows]
        assert kinds == ["normalization", "monotonicity", "monotonicity", "submodularity"]
        sub = rows[-1]
        coeffs = dict(sub.coeffs)
        assert coeffs == {0b11: 1.0, 0b00: 1.0, 0b01: -1.0, 0b10: -1.0}
        assert sub.sense == "<="


class TestLpSolve:
    def test_two_caps(self):
        lp = LinearProgram(1, np.array([1.0]))
        lp.add(np.array([1.0]), "<=", 1.0)
        lp.add(np.array([1.0]), "<=", 2.0)
        result = lp_solve(lp)
        assert result.status == "optimal"
        assert result.value == pytest.approx(1.0)

    def test_unbounded_with_ray(self):
        lp = LinearProgram(2, np.array([1.0, 0.0]))
        lp.add(np.array([0.0, 1.0]), "<=", 5.0)
        result = lp_solve(lp)
        assert result.status == "unbounded"
        assert result.ray is not None
        assert result.ray[0] > 0  # the objective grows along the ray

    def test_shannon_two_vars_max_union(self):
        # maximize h(XY) under h(X) <= 1, h(Y) <= 1 and the Shannon rows
        n_h = 3
        objective = np.zeros(n_h)
        objective[0b11 - 1] = 1.0
        lp = LinearProgram(n_h, objective)
        for con in shannon_constraints(2):
            if con.kind == "normalization":
                continue
            row = np.zeros(n_h)
            for mask, coeff in con.coeffs:
                if mask:
                    row[mask - 1] += coeff
            lp.add(row, con.sense, con.rhs)
        for single in (0b01, 0b10):
            row = np.zeros(n_h)
            row[single - 1] = 1.0
            lp.add(row, "<=", 1.0)
        result = lp_solve(lp)
        assert result.value == pytest.approx(2.0)

    def test_equality_rows_supported(self):
        lp = LinearProgram(2, np.array([1.0, 1.0]))
        lp.add(np.array([1.0, 1.0]), "==", 3.0)
        lp.add(np.array([1.0, 0.0]), "<=", 2.0)
        result = lp_solve(lp)
        assert result.value == pytest.approx(3.0)

    def test_matches_scipy_on_random_programs(self):
        rng = random.Random(99)
        for trial in range(40):
            n = rng.randint(1, 4)
            m = rng.randint(1, 6)
            c = np.array([rng.uniform(-1, 1) for _ in range(n)])
            rows = []
            for _ in range(m):
                rows.append(
                    (
                        np.array([rng.uniform(-1, 2) for _ in range(n)]),
                        "<=",
                        rng.uniform(0, 4),
                    )
                )
            lp = LinearProgram(n, c)
            for a, s, b in rows:
                lp.add(a, s, b)
            mine = lp_solve(lp)
            res = scipy_opt.linprog(
                -c,
                A_ub=np.array([a for a, _, _ in rows]),
                b_ub=np.array([b for _, _, b in rows]),
                bounds=[(0, None)] * n,
                method="highs",
            )
            if mine.status == "unbounded":
                assert res.status == 3, f"trial {trial}"
            else:
                assert res.status == 0, f"trial {trial}"
                assert mine.value == pytest.approx(-res.fun, abs=1e-7), f"trial {trial}"


class TestSelectorLp:
    def test_four_cycle_named_selector(self, queries):
        q = queries["4cycle_full"]
        u = q.universe
        selector = (
            u.varset(["X", "Y", "Z"]),
            u.varset(["Y", "Z", "W"]),
            u.full,
        )
        value, certificate, ray = solve_selector_lp(selector, classic_stats(q), u)
        assert value == pytest.approx(1.5, abs=1e-9)
        assert ray is None
        assert check_polymatroid(certificate)
        assert satisfies_stats(certificate, classic_stats(q))

    def test_direct_cap_on_selected_bag(self, queries):
        q = queries["triangle"]
        u = q.universe
        stats = StatisticsSpec(
            classic_stats(q).terms + (term(u, ["X", "Y", "Z"], [], 1.0),)
        )
        value, _, _ = solve_selector_lp((u.full,), stats, u)
        assert value <= 1.0 + 1e-9

    def test_empty_stats_unbounded(self, queries):
        q = queries["triangle"]
        value, certificate, ray = solve_selector_lp(
            (q.universe.full,), StatisticsSpec(()), q.universe
        )
        assert math.isinf(value)
        assert certificate is None
        assert ray is not None


class TestSubwGoldens:
    def test_four_cycle(self, queries):
        result = subw(queries["4cycle_full"], classic_stats(queries["4cycle_full"]))
        assert result.value == pytest.approx(1.5, abs=1e-6)
        assert result.complete

    def test_triangle_with_certificates(self, queries):
        q = queries["triangle"]
        result = subw(q, classic_stats(q))
        assert result.value == pytest.approx(1.5, abs=1e-6)
        # the half-split set function is feasible, so 1.5 is reachable ...
        u = q.universe
        half = SetFunction(
            u, np.array([bin(m).count("1") / 2 for m in range(8)])
        )
        assert check_polymatroid(half)
        assert satisfies_stats(half, classic_stats(q))
        # ... and an independent solver agrees on the cap
        rows, rhs = [], []
        for x in range(8):
            for y in range(8):
                if x != y and (x & ~y) == 0:
                    row = np.zeros(7)
                    if x:
                        row[x - 1] += 1.0
                    row[y - 1] -= 1.0
                    rows.append(row)
                    rhs.append(0.0)
                row = np.zeros(7)
                for m, s in (((x | y), 1.0), ((x & y), 1.0), (x, -1.0), (y, -1.0)):
                    if m:
                        row[m - 1] += s
                rows.append(row)
                rhs.append(0.0)
        for pair in (0b011, 0b101, 0b110):
            row = np.zeros(7)
            row[pair - 1] = 1.0
            rows.append(row)
            rhs.append(1.0)
        objective = np.zeros(7)
        objective[0b111 - 1] = -1.0
        res = scipy_opt.linprog(
            objective, A_ub=np.array(rows), b_ub=np.array(rhs),
            bounds=[(0, None)] * 7, method="highs",
        )
        assert -res.fun == pytest.approx(1.5, abs=1e-7)

    def test_two_path_full(self):
        from jaguar import parse_query

        q_full = parse_query("Q(X,Y,Z) :- R(X,Y), S(Y,Z).")
        result = subw(q_full, classic_stats(q_full))
        assert result.value == pytest.approx(1.0, abs=1e-6)

    def test_certificates_reverified(self, queries):
        for name in ("triangle", "4cycle_full", "2path_proj", "5cycle_full"):
            q = queries[name]
            stats = classic_stats(q)
            result = subw(q, stats)
            assert check_polymatroid(result.certificate), name
            assert satisfies_stats(result.certificate, stats), name


class TestSubwProperties:
    def test_adding_terms_never_increases(self, queries):
        q = queries["4cycle_full"]
        u = q.universe
        base = classic_stats(q)
        rng = random.Random(5)
        baseline = subw(q, base).value
        for trial in range(10):
            masks = [rng.randint(1, 15) for _ in range(2)]
            extra = term(
                u,
                u.mask_names(masks[0]),
                u.mask_names(masks[1]),
                rng.uniform(0.0, 1.5),
            )
            extended = StatisticsSpec(base.terms + (extra,))
            assert subw(q, extended).value <= baseline + 1e-9

    def test_tightening_never_increases(self, queries):
        q = queries["triangle"]
        base = classic_stats(q)
        rng = random.Random(6)
        previous = subw(q, base).value
        for factor in (0.9, 0.7, 0.5, 0.2):
            scaled = StatisticsSpec(
                tuple(
                    StatTerm(
                        targets=t.targets,
                        given=t.given,
                        exponent=t.exponent * factor,
                        guard_name=t.guard_name,
                        guard_schema=t.guard_schema,
                    )
                    for t in base
                )
            )
            value = subw(q, scaled).value
            assert value <= previous + 1e-9
            previous = value

    def test_min_max_agreement_via_certificate(self, queries):
        # the certificate makes every decomposition carry a bag at or above
        # the optimum, so the min-over-decompositions view agrees
        for name in ("triangle", "4cycle_full", "2path_proj"):
            q = queries[name]
            stats = classic_stats(q)
            result = subw(q, stats)
            family = decomposition_family(q)
            min_max = min(
                max(result.certificate[bag] for bag in td.bags) for td in family
            )
            assert min_max >= result.value - 1e-6

    def test_random_feasible_h_never_beats_subw(self, queries):
        q = queries["4cycle_full"]
        u = q.universe
        stats = classic_stats(q)
        limit = subw(q, stats).value
        family = decomposition_family(q)
        rng = random.Random(8)
        for trial in range(25):
            # coverage functions are polymatroids; scale into the caps
            ground = list(range(6))
            assigned = {
                v: {x for x in ground if rng.random() < 0.5} for v in u.names
            }
            values = np.zeros(16)
            for mask in range(16):
                covered = set()
                for i, v in enumerate(u.names):
                    if mask >> i & 1:
                        covered |= assigned[v]
                values[mask] = float(len(covered))
            h = SetFunction(u, values)
            scale = 1.0
            for t in stats:
                diff = h[t.union_mask] - h[t.given.mask]
                if diff > 1e-12:
                    scale = min(scale, t.exponent / diff)
            scaled = SetFunction(u, values * scale)
            assert check_polymatroid(scaled)
            assert satisfies_stats(scaled, stats)
            value = min(
                max(scaled[bag] for bag in td.bags) for td in family
            )
            assert value <= limit + 1e-6

    def test_early_stop_reports_partial(self, queries):
        q = queries["4cycle_full"]
        result = subw(q, classic_stats(q), stop_at=0.5)
        assert result.value >= 0.5
        assert not result.complete


class TestSubwAgainstScipyFullSystem:
    def test_random_stats_agree(self, queries):
        q = queries["triangle"]
        u = q.universe
        rng = random.Random(77)
        family = decomposition_family(q)
        for trial in range(8):
            terms = tuple(
                term(u, schema.members, [], rng.uniform(0.3, 1.2), guard=name)
                for name, schema in q.atoms
            )
            stats = StatisticsSpec(terms)
            mine = subw(q, stats).value
            # independent: full pairwise Shannon system + the same caps,
            # one LP per selector
            best = -1.0
            from jaguar import bag_selectors

            for selector in bag_selectors(family):
                rows, rhs = [], []
                nv = 8
                for x in range(nv):
                    for y in range(nv):
                        if x != y and (x & ~y) == 0:
                            row = np.zeros(8)
                            if x:
                                row[x - 1] += 1.0
                            row[y - 1] -= 1.0
                            rows.append(row)
                            rhs.append(0.0)
                        row = np.zeros(8)
                        for m, s in (((x | y), 1.0), ((x & y), 1.0), (x, -1.0), (y, -1.0)):
                            if m:
                                row[m - 1] += s
                        rows.append(row)
                        rhs.append(0.0)
                for t in terms:
                    row = np.zeros(8)
                    row[t.union_mask - 1] += 1.0
                    if t.given.mask:
                        row[t.given.mask - 1] -= 1.0
                    rows.append(row)
                    rhs.append(t.exponent)
                for bag in selector:
                    row = np.zeros(8)
                    row[7] = 1.0  # t variable
                    row[bag.mask - 1] -= 1.0
                    rows.append(row)
                    rhs.append(0.0)
                objective = np.zeros(8)
                objective[7] = -1.0
                res = scipy_opt.linprog(
                    objective, A_ub=np.array(rows), b_ub=np.array(rhs),
                    bounds=[(0, None)] * 8, method="highs",
                )
                best = max(best, -res.fun)
            assert mine == pytest.approx(best, abs=1e-6), f"trial {trial}"


class TestSelectorLimit:
    def test_limited_enumeration_reports_incomplete(self, queries):
        q = queries["5cycle_full"]
        stats = classic_stats(q)
        partial = subw(q, stats, selector_limit=5)
        full = subw(q, stats)
        assert not partial.complete
        assert full.complete
        assert partial.value <= full.value + 1e-9
        assert full.value == pytest.approx(5 / 3, abs=1e-6)
