import random

import pytest

from jaguar import (
    Relation,
    Universe,
    default_stats,
    gen_random,
    parse_query,
)

QUERY_TEXTS = {
    "triangle": "Q(X,Y,Z) :- R(X,Y), S(Y,Z), T(X,Z).",
    "4cycle_full": "Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).",
    "4cycle_bool": "Q() :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).",
    "2path_proj": "Q(X,Z) :- R(X,Y), S(Y,Z).",
    "5cycle_full": "Q(A,B,C,D,E) :- R(A,B), S(B,C), T(C,D), U(D,E), V(E,A).",
}


@pytest.fixture(scope="session")
def queries():
    return {name: parse_query(text) for name, text in QUERY_TEXTS.items()}


def make_relation(universe, names, rows, name=None):
    return Relation(universe.varset(names), [tuple(r) for r in rows], name=name)


@pytest.fixture
def xy_universe():
    return Universe(("X", "Y"))


@pytest.fixture
def small_rel(xy_universe):
    # the running example: three rows over (X, Y)
    return make_relation(xy_universe, ("X", "Y"), [("1", "1"), ("2", "1"), ("1", "2")], "R")


def random_instance(query, seed, size_lo=5, size_hi=50, domain=12):
    rng = random.Random(seed)
    sizes = [rng.randint(size_lo, size_hi) for _ in query.atoms]
    return gen_random(
        seed=seed,
        schemas=[(name, schema.members) for name, schema in query.atoms],
        sizes=sizes,
        domain_size=domain,
        universe=query.universe,
    )


def stats_for(query, instance):
    return default_stats(query, instance, instance.size)
