from fractions import Fraction
from math import comb, lcm

import pytest

from src.core.bounds import (
    canonical_profile,
    count_a_profile,
    l_coded,
    l_coded_envelope,
    lower_bound_lemma1,
    lower_bound_lemma2,
)
from src.core.codec import MulticastMessage
from src.core.engine import (
    IntermediateStore,
    LoadReport,
    Provenance,
    ShuffleStrategy,
    run_job,
    run_map_phase,
    run_reduce_phase,
    run_shuffle,
    verify_against_oracle,
)
from src.core.exceptions import InvariantViolation, JobValidationError, ShuffleError
from src.core.placement import (
    JobSpec,
    assign_map_tasks,
    assign_reduce_tasks,
    assign_split_map_tasks,
    random_placement,
    split_noninteger_r,
)
from src.services.experiments import replay_example1, replay_example2
from src.services.jobs import (
    identity_job,
    labelled_job,
    labelled_value,
    letter_count_job,
    reference_letter_count,
    synthetic_inputs,
    synthetic_job,
)


def _run(spec, job=None, inputs=None, strategy=ShuffleStrategy.CODED, workers=1, fa=None):
    fa = fa or assign_map_tasks(spec)
    ra = assign_reduce_tasks(spec)
    job = job or synthetic_job(spec.Q, spec.T)
    inputs = inputs if inputs is not None else synthetic_inputs(spec.N, seed=7)
    return run_job(spec, job, inputs, fa, ra, strategy, workers=workers)


def test_three_node_example(example1_spec):
    result = _run(example1_spec, labelled_job(3, 8), [b""] * 6)
    assert result.oracle.passed
    assert result.report.message_count == 3
    assert result.report.total_bits == 3 * 8
    assert result.report.load == Fraction(1, 6)
    store = result.shuffle.store
    assert store.provenance(1, 1, 5) is Provenance.DECODED
    assert store.get(1, 1, 5) == labelled_value(1, 5, 8)
    assert store.provenance(1, 1, 1) is Provenance.COMPUTED


def test_four_node_example(example2_spec):
    result = _run(example2_spec, labelled_job(6, 4), [b""] * 6)
    assert result.oracle.passed
    lengths = sorted(m.bit_length for m in result.shuffle.messages)
    assert lengths == [2] * 8 + [4] * 12
    assert result.report.per_round == {3: 48, 4: 16}
    assert result.report.load == Fraction(4, 9)


def test_example_replays_pass():
    for result in (replay_example1(), replay_example2()):
        assert result.passed, result.problems
        assert result.log


def test_uncoded_and_coded_agree_without_replication():
    spec = JobSpec(K=3, Q=3, N=6, r=1, s=1, T=8)
    uncoded = _run(spec, strategy=ShuffleStrategy.UNCODED)
    coded = _run(spec)
    assert uncoded.report.load == Fraction(2, 3)
    assert coded.report.load == Fraction(2, 3)
    assert uncoded.oracle.passed and coded.oracle.passed


def test_uncoded_messages_are_ordered():
    spec = JobSpec(K=4, Q=6, N=6, r=2, s=2, T=4)
    messages = _run(spec, strategy=ShuffleStrategy.UNCODED).shuffle.messages
    keys = [(m.sender, m.shuffle_subset, m.index) for m in messages]
    assert keys == sorted(keys)
    assert all(m.bit_length == 4 for m in messages)


def _exactness_points(K):
    T = 8 * lcm(*range(1, K + 1))
    for r in range(1, K + 1):
        for s in range(1, K + 1):
            yield JobSpec(K=K, Q=comb(K, s), N=comb(K, r), r=r, s=s, T=T)


def _check_exact(spec):
    result = _run(spec)
    assert result.oracle.passed
    formula = l_coded(spec.r_int(), spec.s, spec.K)
    bound = lower_bound_lemma2(canonical_profile(spec.K, spec.r_int(), spec.N), spec.s)
    assert result.report.load == formula == bound, spec.describe()


@pytest.mark.parametrize("K", [2, 3, 4, 5])
def test_measured_load_matches_formula_and_bound(K):
    for spec in _exactness_points(K):
        _check_exact(spec)


@pytest.mark.slow
@pytest.mark.parametrize("K", [6, 7, 8])
def test_measured_load_matches_formula_and_bound_large(K):
    for spec in _exactness_points(K):
        _check_exact(spec)


def test_certified_subgrid():
    K, T = 6, 480
    for r in range(1, K + 1):
        for s in range(1, K + 1):
            spec = JobSpec(K=K, Q=comb(K, s) * 2, N=comb(K, r) * 4, r=r, s=s, T=T)
            result = _run(spec)
            assert result.oracle.passed, spec.describe()
            assert result.report.load == l_coded(r, s, K), spec.describe()


@pytest.mark.slow
def test_single_reducer_sweep_at_scale():
    for r in range(1, 11):
        spec = JobSpec(K=10, Q=10, N=2520, r=r, s=1, T=1024)
        result = _run(spec, workers=4)
        assert result.oracle.passed
        assert result.report.load == Fraction(1, r) * (1 - Fraction(r, 10))


def test_message_log_independent_of_worker_count(example2_spec):
    logs = {
        workers: _run(example2_spec, workers=workers).shuffle.message_log()
        for workers in (1, 2, 4)
    }
    assert logs[1] == logs[2] == logs[4]


def test_oracle_locates_corrupted_value(example1_spec):
    fa = assign_map_tasks(example1_spec)
    ra = assign_reduce_tasks(example1_spec)
    job = synthetic_job(3, 8)
    inputs = synthetic_inputs(6, seed=3)
    store = run_map_phase(example1_spec, fa, job, inputs)
    outcome = run_shuffle(example1_spec, fa, ra, store)
    corrupted = outcome.store
    good = corrupted.get(2, 2, 3)
    corrupted.put(2, 2, 3, bytes([good[0] ^ 0x10]), Provenance.DECODED)

    outputs = run_reduce_phase(example1_spec, ra, corrupted, job)
    report = verify_against_oracle(example1_spec, job, inputs, outputs, corrupted)
    assert not report.passed
    assert report.location == (2, 2, 3)
    assert "v_(2,3)" in report.first_divergence


def test_shuffle_leaves_input_store_untouched(example1_spec):
    fa = assign_map_tasks(example1_spec)
    ra = assign_reduce_tasks(example1_spec)
    store = run_map_phase(example1_spec, fa, labelled_job(3, 8), [b""] * 6)
    before = store.count(1)
    outcome = run_shuffle(example1_spec, fa, ra, store)
    assert store.count(1) == before
    assert outcome.store.count(1, Provenance.DECODED) == 2


@pytest.mark.parametrize("r", [1, 2, 3])
def test_random_placements_respect_converse_bound(r):
    spec = JobSpec(K=4, Q=4, N=12, r=r, s=1, T=64)
    for seed in range(5):
        fa = random_placement(spec, seed)
        coded = _run(spec, strategy=ShuffleStrategy.RANDOM_PLACEMENT_CODED, fa=fa)
        uncoded = _run(spec, strategy=ShuffleStrategy.UNCODED, fa=fa)
        assert coded.oracle.passed and uncoded.oracle.passed
        bound = lower_bound_lemma1(count_a_profile(fa))
        assert coded.report.load >= bound
        assert uncoded.report.load >= bound


@pytest.mark.slow
def test_random_placements_never_beat_converse_bound():
    for seed in range(200):
        K = 2 + seed % 5
        r = 1 + (seed // 5) % K
        spec = JobSpec(K=K, Q=K, N=6 + seed % 7, r=r, s=1, T=40)
        fa = random_placement(spec, seed)
        inputs = synthetic_inputs(spec.N, seed=seed)
        bound = lower_bound_lemma1(count_a_profile(fa))
        for strategy in (ShuffleStrategy.RANDOM_PLACEMENT_CODED, ShuffleStrategy.UNCODED):
            result = _run(spec, inputs=inputs, strategy=strategy, fa=fa)
            assert result.oracle.passed, (seed, strategy)
            assert result.report.load >= bound, (seed, strategy)


def test_random_placement_with_reduce_replication():
    spec = JobSpec(K=4, Q=6, N=10, r=2, s=2, T=32)
    fa = random_placement(spec, seed=11)
    result = _run(spec, strategy=ShuffleStrategy.RANDOM_PLACEMENT_CODED, fa=fa)
    assert result.oracle.passed
    assert result.report.load >= lower_bound_lemma2(count_a_profile(fa), 2)


def test_identity_job_with_padding():
    spec = JobSpec(K=3, Q=3, N=5, r=2, s=1, T=16)
    inputs = [bytes([n, n + 100]) for n in range(1, 6)]
    result = _run(spec, identity_job(3, 16), inputs)
    assert spec.n_padded == 6
    assert result.oracle.passed
    for k, outputs in result.outputs.items():
        for q, output in outputs.items():
            assert output == b"".join(inputs)
    assert result.report.load == Fraction(3 * 16, 3 * 5 * 16)
    assert result.report.load_padded == Fraction(1, 6)


def test_letter_count_job():
    texts = [b"Hello coded world", b"abcabc", b"Zebra", b"", b"mapreduce shuffle", b"xyz"]
    spec = JobSpec(K=3, Q=3, N=6, r=2, s=1, T=32)
    result = _run(spec, letter_count_job(3, 32), texts)
    assert result.oracle.passed
    expected = reference_letter_count(texts, 3)
    for k, outputs in result.outputs.items():
        for q, output in outputs.items():
            assert int.from_bytes(output, "big") == expected[q - 1]


def test_non_integer_computation_load():
    spec = JobSpec(K=4, Q=4, N=120, r=Fraction(5, 2), s=1, T=24)
    fa = assign_split_map_tasks(split_noninteger_r(spec), spec.K)
    assert fa.levels() == [2, 3]
    assert fa.computation_load() == Fraction(5, 2)
    result = _run(spec, fa=fa)
    assert result.oracle.passed
    assert result.report.load == l_coded_envelope(Fraction(5, 2), 1, 4) == Fraction(1, 6)


def test_reduce_infers_file_count_for_non_integer_load():
    spec = JobSpec(K=4, Q=4, N=120, r=Fraction(5, 2), s=1, T=24)
    fa = assign_split_map_tasks(split_noninteger_r(spec), spec.K)
    ra = assign_reduce_tasks(spec)
    job = synthetic_job(spec.Q, spec.T)
    inputs = synthetic_inputs(spec.N, seed=7)
    outcome = run_shuffle(spec, fa, ra, run_map_phase(spec, fa, job, inputs))
    assert outcome.store.file_count() == fa.n_files
    outputs = run_reduce_phase(spec, ra, outcome.store, job)
    assert verify_against_oracle(spec, job, inputs, outputs, n_files=fa.n_files).passed


def test_store_rejects_missing_and_malformed_values():
    store = IntermediateStore(K=2, T=12)
    with pytest.raises(ShuffleError, match="does not hold"):
        store.get(1, 1, 1)
    with pytest.raises(JobValidationError):
        store.put(1, 1, 1, b"\x00")
    with pytest.raises(JobValidationError):
        store.put(1, 1, 1, b"\x00\x0f")


def test_map_must_return_q_values(example1_spec):
    job = synthetic_job(2, 8)
    with pytest.raises(JobValidationError, match="expected Q=3"):
        _run(example1_spec, job)


def test_load_report_consistency_check():
    report = LoadReport("coded", 3, 3, 6, 6, 8, Fraction(2), 1)
    report.record(MulticastMessage(1, (1, 2, 3), 1, b"\x00", 8), 3)
    report.check()
    assert report.csv_row() == ["coded", "3", "2", "1", "3", "6", "8", "8", "1", "18"]
    report.per_round[3] = 4
    with pytest.raises(InvariantViolation, match="per-round"):
        report.check()
