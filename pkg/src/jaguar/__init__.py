"""Adaptive conjunctive-query evaluation with degree-aware width tooling."""

from .calibration import WorkMeter, calibrate, shortest_path_oracle
from .decompositions import (
    TreeDecomposition,
    bag_selectors,
    covers,
    decomposition_family,
    enumerate_free_connex_tds,
    validate_td,
)
from .engine import (
    AnswerSet,
    EngineConfig,
    RecursionTrace,
    baseline_single_td,
    equal_degree_partition,
    evaluate,
    heavy_light_partition,
    potential,
    yannakakis,
)
from .errors import (
    InvariantError,
    JaguarError,
    LimitError,
    QueryParseError,
    SchemaError,
    SolverError,
    ValidationError,
)
from .frontend import (
    ConjunctiveQuery,
    StatisticsSpec,
    StatTerm,
    default_stats,
    load_instance,
    parse_query,
    parse_stats,
    render_query,
)
from .generators import brute_force, gen_random, gen_square, satisfaction_count
from .relations import (
    DatabaseInstance,
    Relation,
    augment,
    degree,
    degree_at,
    join,
    project,
    semijoin,
)
from .setfunctions import (
    SetFunction,
    TruncationResult,
    check_polymatroid,
    f_value,
    init_g,
    min_violation,
    satisfies_stats,
    truncate,
)
from .varsets import Universe, VarSet
from .widthlp import (
    LinearProgram,
    SubwResult,
    lp_solve,
    shannon_constraints,
    solve_selector_lp,
    subw,
)

__version__ = "0.1.0"
