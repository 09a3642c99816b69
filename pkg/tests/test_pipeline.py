import pytest
from hypothesis import given, settings, strategies as st

from spt.apps.conway import build_conway_graph
from spt.errors import AmbiguousPlanError, PipelineFailure, SptError, UnsatisfiablePlanError
from spt.pipeline import Algorithm, ArtifactStore, algorithm, execute, is_valid_order, plan
from spt.session import standard_algorithms


def alg(name, inputs=(), outputs=(), needs=(), grants=(), body=None):
    return Algorithm(name, body or (lambda a: {o: name for o in outputs}), frozenset(inputs),
                     frozenset(outputs), required_tokens=frozenset(needs),
                     produced_tokens=frozenset(grants))


def names(order):
    return [a.name for a in order]


def test_two_step_chain():
    a, b = alg("A", outputs={"M"}), alg("B", {"M"}, {"P"})
    assert names(plan([b, a], goal_outputs={"P"})) == ["A", "B"]


def test_token_orders_loader_before_runner():
    loader = alg("loader", outputs={"Loaded"}, grants={"DataLoaded"})
    runner = alg("runner", outputs={"SimDone"}, needs={"DataLoaded"})
    assert names(plan([runner, loader], goal_outputs={"SimDone"})) == ["loader", "runner"]


def test_missing_producer():
    with pytest.raises(UnsatisfiablePlanError) as err:
        plan([alg("A", outputs={"M"})], goal_outputs={"Q"})
    assert list(err.value.missing) == ["Q"]


def test_ambiguity_and_alternatives():
    # Alternatives for one artifact resolve alphabetically.
    order = plan([alg("zeta", outputs={"M"}), alg("alpha", outputs={"M"})], goal_outputs={"M"})
    assert names(order) == ["alpha"]
    # Two chosen algorithms that both write M is an error.
    both = [alg("a", outputs={"M", "X"}), alg("b", outputs={"M", "Y"})]
    with pytest.raises(AmbiguousPlanError):
        plan(both, goal_outputs={"X", "Y"})


def test_unneeded_algorithms_excluded():
    algs = [alg("A", outputs={"M"}), alg("B", {"M"}, {"P"}), alg("C", outputs={"Z"})]
    assert names(plan(algs, goal_outputs={"M"})) == ["A"]
    assert plan(algs, {"M"}, goal_outputs={"M"}) == []


def test_optional_inputs_do_not_pull_producers():
    opt = Algorithm("user", lambda a: {"R": sorted(a)}, outputs=frozenset({"R"}),
                    optional_inputs=frozenset({"Extra"}))
    extra = alg("extra", outputs={"Extra"})
    assert names(plan([opt, extra], goal_outputs={"R"})) == ["user"]
    store = execute(plan([opt], goal_outputs={"R"}), ArtifactStore({"Extra": 1}))
    assert store["R"] == ["Extra"]


def test_algorithm_must_produce_something():
    with pytest.raises(SptError):
        Algorithm("nothing", lambda a: {})


def test_execute_empty_plan():
    store = ArtifactStore({"A": 1})
    assert execute([], store).as_dict() == {"A": 1}


def test_failure_keeps_earlier_outputs():
    def boom(a):
        raise RuntimeError("bad input")

    algs = [alg("first", outputs={"M"}), alg("second", {"M"}, {"P"}, body=boom)]
    store = ArtifactStore()
    with pytest.raises(PipelineFailure) as err:
        execute(plan(algs, goal_outputs={"P"}), store)
    assert err.value.algorithm == "second"
    assert isinstance(err.value.cause, RuntimeError)
    assert err.value.store["M"] == "first"


def test_write_once():
    algs = [alg("a", outputs={"M"}), alg("b", {"M"}, {"M2"}, body=lambda a: {"M": 2, "M2": 1})]
    with pytest.raises(PipelineFailure):
        execute(algs, ArtifactStore())


def test_decorator_and_trace():
    @algorithm("double", inputs={"N"}, outputs={"Twice"})
    def double(a):
        return {"Twice": a["N"] * 2}

    store = execute(plan([double], {"N"}, goal_outputs={"Twice"}), ArtifactStore({"N": 21}))
    assert store["Twice"] == 42
    (record,) = store.trace
    assert record.algorithm == "double" and record.consumed == ["N"]
    assert "double" in str(record)


def test_standard_flow_on_conway():
    store = ArtifactStore({"MachineSpec": "2x2", "MachineGraph": build_conway_graph(3, 3),
                           "RunTime": 4})
    order = plan(standard_algorithms(), store.names(), goal_outputs={"SimResults"})
    execute(order, store)
    for name in ("Machine", "MachineGraph", "Placements", "Tables", "Keys", "Tags",
                 "SimResults"):
        assert name in store
    assert {"ApplicationLoaded", "TablesLoaded", "DataLoaded", "SimulationRun"} <= store.tokens


@st.composite
def descriptor_sets(draw):
    """Random layered algorithm sets over artifacts a0..a9."""
    n = draw(st.integers(1, 10))
    algs = []
    for i in range(n):
        inputs = draw(st.sets(st.integers(0, i + 2), max_size=3))
        produced = {f"a{i + 3}"}
        if draw(st.booleans()):
            produced.add(f"b{draw(st.integers(0, 2))}")
        algs.append(alg(f"alg{i}", {f"a{j}" for j in inputs}, produced))
    goals = draw(st.sets(st.sampled_from([f"a{i + 3}" for i in range(n)]), min_size=1,
                         max_size=3))
    initial = draw(st.sets(st.sampled_from(["a0", "a1", "a2"])))
    return algs, goals, initial


@settings(max_examples=300, deadline=None)
@given(descriptor_sets())
def test_plan_validity_minimality_determinism(case):
    algs, goals, initial = case
    try:
        order = plan(algs, initial, (), goals)
    except (UnsatisfiablePlanError, AmbiguousPlanError):
        return
    assert is_valid_order(order, initial, (), goals)
    for a in order:
        assert not is_valid_order([b for b in order if b is not a], initial, (), goals)
    assert names(plan(algs, initial, (), goals)) == names(order)
    assert names(plan(list(algs), set(initial), (), set(goals))) == names(order)
