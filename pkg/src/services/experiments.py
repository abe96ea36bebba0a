"""
Experiment harness: load sweeps, worked-example replays, random-placement
studies and bound tables, all emitted as CSV with the configuration echoed in
a comment header.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from math import comb, gcd
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values
from tqdm import tqdm

from src.config.settings import settings
from src.core.bounds import (
    count_a_profile,
    l_coded,
    l_coded_envelope,
    l_uncoded,
    lower_bound_lemma1,
    lower_bound_lemma2,
    rows_to_csv,
)
from src.core.codec import MulticastMessage, round_range
from src.core.engine import (
    ShuffleOutcome,
    ShuffleStrategy,
    run_map_phase,
    run_shuffle,
)
from src.core.exceptions import InvariantViolation, JobValidationError
from src.core.gf2m import FieldSpec
from src.core.placement import (
    FileAssignment,
    JobSpec,
    assign_map_tasks,
    assign_reduce_tasks,
    assign_split_map_tasks,
    nearest_multiples,
    random_placement,
    split_noninteger_r,
)
from src.services.jobs import labelled_job, labelled_value, synthetic_inputs, synthetic_job
from src.utils.bits import from_bits, to_bits
from src.utils.logger import get_logger, progress_safe_logging

logger = get_logger(__name__)

MODES = ("sweep", "example1", "example2", "examples", "sort", "random-placement", "bounds")


def parse_rationals(text: str) -> List[Fraction]:
    """'1-10' -> 1..10; '1,1.5,2' or '3/2' -> exact rationals."""
    text = str(text).strip()
    if "-" in text and "," not in text:
        low, high = (int(part) for part in text.split("-", 1))
        return [Fraction(v) for v in range(low, high + 1)]
    return [Fraction(part.strip()) for part in text.split(",") if part.strip()]


def parse_ints(text: str) -> List[int]:
    return [int(v) for v in parse_rationals(text)]


@dataclass
class ExperimentConfig:
    """Parameters of one CLI run; every field can come from a flag or a key=value file."""
    mode: str = "sweep"
    K: int = 10
    r: str = "1-10"
    s: str = "1"
    Q: int = 10
    N: int = 2520
    T: int = 1024
    seed: int = 0
    seeds: int = 20
    records: int = field(default_factory=lambda: settings.sort.RECORDS)
    key_bytes: int = field(default_factory=lambda: settings.sort.KEY_BYTES)
    value_bytes: int = field(default_factory=lambda: settings.sort.VALUE_BYTES)
    strategy: str = ShuffleStrategy.CODED.value
    workers: int = field(default_factory=lambda: settings.engine.WORKERS)
    output: Optional[str] = None

    @classmethod
    def load(
        cls, config_file: Optional[str] = None, overrides: Optional[Mapping[str, object]] = None
    ) -> "ExperimentConfig":
        """Settings defaults, then the key=value file, then explicit overrides."""
        values: Dict[str, object] = {}
        known = {f.name.lower(): f.name for f in fields(cls)}
        if config_file:
            for key, value in dotenv_values(config_file).items():
                name = known.get(key.lower().replace("-", "_"))
                if name is None:
                    logger.warning(f"Ignoring unknown config key '{key}' in {config_file}")
                    continue
                values[name] = value
        for key, value in (overrides or {}).items():
            if value is not None and key in known.values():
                values[key] = value

        config = cls()
        for f in fields(cls):
            if f.name not in values:
                continue
            value = values[f.name]
            current = getattr(config, f.name)
            if isinstance(current, int) and not isinstance(value, int):
                value = int(str(value), 0)
            setattr(config, f.name, value)
        config.validate_mode()
        return config

    def validate_mode(self) -> None:
        if self.mode not in MODES:
            raise JobValidationError(f"unknown mode '{self.mode}', expected one of {MODES}")
        ShuffleStrategy(self.strategy)

    @property
    def r_values(self) -> List[Fraction]:
        return parse_rationals(self.r)

    @property
    def s_values(self) -> List[int]:
        return parse_ints(self.s)

    def header(self) -> str:
        """Configuration echoed as '# key=value' lines."""
        return "".join(f"# {f.name}={getattr(self, f.name)}\n" for f in fields(self))


class SweepRow(NamedTuple):
    s: int
    r: Fraction
    l_uncoded: Fraction
    l_coded: Fraction
    l_measured: Fraction
    l_measured_padded: Fraction
    l_uncoded_measured: Fraction
    lemma_bound: Fraction


SWEEP_COLUMNS = SweepRow._fields


def check_sweep_point(K: int, Q: int, N: int, T: int, r: Fraction, s: int) -> List[str]:
    """Divisibility problems of one (r, s) point, each with the nearest valid values."""
    problems = []
    if not 1 <= r <= K or not 1 <= s <= K:
        return [f"r={r}, s={s} outside [1, K={K}]"]
    if Q % comb(K, s):
        problems.append(
            f"r={r}, s={s}: Q={Q} is not a multiple of C({K},{s})={comb(K, s)}; "
            f"nearest valid Q: {nearest_multiples(Q, comb(K, s))}"
        )
        return problems
    if r.denominator != 1:
        return problems
    r = int(r)
    eta1 = -(-N // comb(K, r))
    eta2 = Q // comb(K, s)
    for size in round_range(r, s, K):
        values = comb(r, size - s) * eta1 * eta2
        if values * T % r:
            fix = r // gcd(r, values)
            problems.append(
                f"r={r}, s={s}: {values}x{T}-bit exclusive sets do not split into {r} segments; "
                f"T must be a multiple of {fix}"
            )
            break
    return problems


def _assignment(spec: JobSpec) -> FileAssignment:
    if spec.integer_r:
        return assign_map_tasks(spec)
    return assign_split_map_tasks(split_noninteger_r(spec), spec.K)


def _sweep_point(config: ExperimentConfig, r: Fraction, s: int) -> SweepRow:
    spec = JobSpec(config.K, config.Q, config.N, r, s, config.T)
    fa = _assignment(spec)
    ra = assign_reduce_tasks(spec)
    inputs = synthetic_inputs(config.N, config.seed)
    store = run_map_phase(spec, fa, synthetic_job(config.Q, config.T), inputs, workers=1)
    coded = run_shuffle(spec, fa, ra, store, ShuffleStrategy.CODED).report
    uncoded = run_shuffle(spec, fa, ra, store, ShuffleStrategy.UNCODED).report
    return SweepRow(
        s, r,
        l_uncoded(r, config.K),
        l_coded_envelope(r, s, config.K),
        coded.load,
        coded.load_padded,
        uncoded.load,
        lower_bound_lemma2(count_a_profile(fa), s),
    )


def run_sweep(config: ExperimentConfig) -> List[SweepRow]:
    """
    Measure coded and uncoded loads for every (s, r) point of the configuration.

    Raises:
        JobValidationError: listing every point that violates divisibility
    """
    points = [(r, s) for s in config.s_values for r in config.r_values]
    problems = [
        problem for r, s in points
        for problem in check_sweep_point(config.K, config.Q, config.N, config.T, r, s)
    ]
    if problems:
        raise JobValidationError("invalid sweep points:\n  " + "\n  ".join(problems))
    for r, s in points:
        if r.denominator == 1 and config.N % comb(config.K, int(r)):
            logger.warning(
                f"r={r}: N={config.N} pads to a multiple of C({config.K},{r}); measured load "
                f"uses unpadded N, nearest exact N: {nearest_multiples(config.N, comb(config.K, int(r)))}"
            )

    logger.info(f"Sweeping {len(points)} points: K={config.K} Q={config.Q} N={config.N} T={config.T}")
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool, progress_safe_logging():
        rows = list(tqdm(
            pool.map(lambda point: _sweep_point(config, *point), points),
            total=len(points),
            desc="Sweep",
            disable=not settings.output.PROGRESS,
        ))
    for row in rows:
        logger.debug(f"s={row.s} r={row.r}: formula {row.l_coded}, measured {row.l_measured}")
    return rows


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    return rows_to_csv(SWEEP_COLUMNS, rows)


@dataclass
class ExpectedMessage:
    sender: int
    shuffle_subset: Tuple[int, ...]
    index: int
    payload: bytes
    bit_length: int


@dataclass
class FixtureResult:
    name: str
    passed: bool
    message_count: int
    load: Fraction
    log: bytes = b""
    problems: List[str] = field(default_factory=list)


def _xor(*payloads: bytes) -> bytes:
    out = bytearray(len(payloads[0]))
    for payload in payloads:
        for i, byte in enumerate(payload):
            out[i] ^= byte
    return bytes(out)


def _half(payload: bytes, T: int, which: int) -> List[int]:
    bits = to_bits(payload, T)
    half = bits[which * (T // 2):(which + 1) * (T // 2)]
    return [int(b) for b in half]


def example1_expectations(T: int = 8) -> List[ExpectedMessage]:
    """Three XOR messages: v31+v23 from node 1, v32+v15 from node 2, v24+v16 from node 3."""
    v = lambda q, n: labelled_value(q, n, T)
    S = (1, 2, 3)
    return [
        ExpectedMessage(1, S, 1, _xor(v(3, 1), v(2, 3)), T),
        ExpectedMessage(2, S, 1, _xor(v(3, 2), v(1, 5)), T),
        ExpectedMessage(3, S, 1, _xor(v(2, 4), v(1, 6)), T),
    ]


def example2_expectations(T: int = 4) -> List[ExpectedMessage]:
    """
    Node 1 in the four-node round: the first halves of v61, v52 and v43
    combined with rows (1, 1, 1) and (1, 2, 3) over GF(4).
    """
    field = FieldSpec.default(2)
    halves = [
        _half(labelled_value(q, n, T), T, 0) for q, n in ((6, 1), (5, 2), (4, 3))
    ]
    words = [int("".join(map(str, h)), 2) for h in halves]
    rows = []
    for i in range(2):
        word = 0
        for alpha, w in zip((1, 2, 3), words):
            word ^= field.mul(field.pow(alpha, i), w)
        bits = [(word >> shift) & 1 for shift in range(T // 2 - 1, -1, -1)]
        rows.append(ExpectedMessage(
            1, (1, 2, 3, 4), i + 1, from_bits(np.array(bits, dtype=np.uint8)), T // 2
        ))
    return rows


def _compare(
    messages: Sequence[MulticastMessage], expected: Sequence[ExpectedMessage]
) -> List[str]:
    problems = []
    by_key = {(m.sender, m.shuffle_subset, m.index): m for m in messages}
    for want in expected:
        got = by_key.get((want.sender, want.shuffle_subset, want.index))
        if got is None:
            problems.append(f"missing message {want.index} of node {want.sender} in {want.shuffle_subset}")
        elif got.payload != want.payload or got.bit_length != want.bit_length:
            problems.append(
                f"message {want.index} of node {want.sender} in {want.shuffle_subset}: "
                f"got {got.payload.hex()}/{got.bit_length}, expected {want.payload.hex()}/{want.bit_length}"
            )
    return problems


def _replay(spec: JobSpec) -> ShuffleOutcome:
    fa = assign_map_tasks(spec)
    ra = assign_reduce_tasks(spec)
    store = run_map_phase(spec, fa, labelled_job(spec.Q, spec.T), [b""] * spec.N)
    return run_shuffle(spec, fa, ra, store, ShuffleStrategy.CODED)


def replay_example1(T: int = 8) -> FixtureResult:
    spec = JobSpec(3, 3, 6, 2, 1, T)
    outcome = _replay(spec)
    problems = _compare(outcome.messages, example1_expectations(T))
    if len(outcome.messages) != 3:
        problems.append(f"expected 3 messages, got {len(outcome.messages)}")
    if outcome.report.load != Fraction(1, 6):
        problems.append(f"expected load 1/6, got {outcome.report.load}")
    if outcome.message_log() != _replay(spec).message_log():
        problems.append("message log differs between runs")
    return FixtureResult("example1", not problems, len(outcome.messages),
                         outcome.report.load, outcome.message_log(), problems)


def replay_example2(T: int = 4) -> FixtureResult:
    spec = JobSpec(4, 6, 6, 2, 2, T)
    outcome = _replay(spec)
    problems = _compare(outcome.messages, example2_expectations(T))
    full = sum(1 for m in outcome.messages if m.bit_length == T)
    half = sum(1 for m in outcome.messages if m.bit_length == T // 2)
    if (full, half, len(outcome.messages)) != (12, 8, 20):
        problems.append(f"expected 12 messages of T bits and 8 of T/2 bits, got {full} and {half}")
    if outcome.report.load != Fraction(4, 9):
        problems.append(f"expected load 4/9, got {outcome.report.load}")
    if outcome.message_log() != _replay(spec).message_log():
        problems.append("message log differs between runs")
    return FixtureResult("example2", not problems, len(outcome.messages),
                         outcome.report.load, outcome.message_log(), problems)


def replay_examples() -> List[FixtureResult]:
    results = [replay_example1(), replay_example2()]
    for result in results:
        if result.passed:
            logger.info(f"{result.name}: {result.message_count} messages, load {result.load}")
        else:
            for problem in result.problems:
                logger.error(f"{result.name}: {problem}")
    return results


class RandomPlacementRow(NamedTuple):
    r: int
    s: int
    l_canonical: Fraction
    coded_mean: Fraction
    coded_min: Fraction
    coded_max: Fraction
    uncoded_mean: Fraction
    bound_min: Fraction
    violations: int


RANDOM_PLACEMENT_COLUMNS = RandomPlacementRow._fields


def _random_placement_point(config: ExperimentConfig, r: int, s: int) -> RandomPlacementRow:
    spec = JobSpec(config.K, config.Q, config.N, r, s, config.T)
    ra = assign_reduce_tasks(spec)
    job = synthetic_job(config.Q, config.T)
    inputs = synthetic_inputs(config.N, config.seed)
    coded, uncoded, bounds = [], [], []
    violations = 0
    for seed in range(config.seed, config.seed + config.seeds):
        fa = random_placement(spec, seed)
        store = run_map_phase(spec, fa, job, inputs, workers=1)
        coded_load = run_shuffle(spec, fa, ra, store, ShuffleStrategy.RANDOM_PLACEMENT_CODED).report.load
        uncoded_load = run_shuffle(spec, fa, ra, store, ShuffleStrategy.UNCODED).report.load
        profile = count_a_profile(fa)
        bound = lower_bound_lemma1(profile) if s == 1 else lower_bound_lemma2(profile, s)
        if min(coded_load, uncoded_load) < bound:
            violations += 1
            logger.error(f"r={r} seed={seed}: load below the converse bound {bound}")
        coded.append(coded_load)
        uncoded.append(uncoded_load)
        bounds.append(bound)
    return RandomPlacementRow(
        r, s, l_coded(r, s, config.K),
        sum(coded, Fraction(0)) / len(coded), min(coded), max(coded),
        sum(uncoded, Fraction(0)) / len(uncoded), min(bounds), violations,
    )


def random_placement_experiment(config: ExperimentConfig) -> List[RandomPlacementRow]:
    """
    Coded load over seeded random placements per integer r, against the
    canonical load and the converse bound of each sampled profile.

    Raises:
        InvariantViolation: a sampled placement beat its converse bound
    """
    points = [(int(r), s) for s in config.s_values for r in config.r_values if r.denominator == 1]
    with progress_safe_logging():
        rows = [
            _random_placement_point(config, r, s)
            for r, s in tqdm(points, desc="Random placement", disable=not settings.output.PROGRESS)
        ]
    if any(row.violations for row in rows):
        raise InvariantViolation("measured load fell below the converse bound")
    return rows
