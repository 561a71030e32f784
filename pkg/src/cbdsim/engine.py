"""Stepping loop, algebraic-loop solving, event location and trace capture.

Each committed step runs in two phases over the schedule:

* phase 1 fixes every signal's left limit (integrators and delays emit
  state, everything else folds its inputs' left limits),
* phase 2 computes impulse vectors and right limits, sweeping the schedule
  until the samples stop changing so that jumps produced by integrators
  late in the schedule still reach their consumers within the same step.

Both execution modes share this evaluator; they differ only in how the
trace is encoded.  Symbolic traces keep impulse vectors and log one event
per coefficient.  Numerical traces fold every coefficient into the
recorded value stream as the finite-difference spike pattern it would have
produced (an order-0 coefficient ``a`` becomes ``a / h*`` at the impulse
step) and keep the impulse log empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from . import blocks as bk
from .blocks import BlockError, heaviside
from .graph import FlatGraph, Model, ModelError, dependency_sort, flatten
from .signals import (
    EMPTY_IMPULSES,
    ImpulseVector,
    StepSample,
    add_vectors,
    extract_order_zero,
    impulses,
    negate_vector,
    shift_orders_up,
)

SINGULAR_TOLERANCE = 1e-12
OVERFLOW_LIMIT = 1e300
ZENO_WINDOW = 1000


class EngineError(RuntimeError):
    pass


class NonlinearLoop(EngineError):
    pass


class SingularLoop(EngineError):
    pass


class ImpulseInLoop(EngineError):
    pass


class ZenoSuspected(EngineError):
    pass


class MaxOrderExceeded(EngineError):
    pass


class SimulationError(EngineError):
    """A block error with the offending block path attached."""

    def __init__(self, block_path: str, cause: Exception):
        super().__init__(f"{block_path}: {cause}")
        self.block_path = block_path
        self.cause = cause


@dataclass(frozen=True)
class SimConfig:
    mode: str = "symbolic"
    h: float = 1e-3
    t_end: float = 1.0
    zc_tol: float = 1e-9
    h_min: float = 1e-12
    watch: tuple[str, ...] = ()
    max_order: int = 16
    history_depth: int = bk.DEFAULT_HISTORY_DEPTH

    def __post_init__(self) -> None:
        if self.mode not in (bk.SYMBOLIC, bk.NUMERICAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (self.h > 0.0 and 0.0 < self.h_min <= self.h):
            raise ValueError("need 0 < h_min <= h")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if not self.zc_tol > 0.0:
            raise ValueError("zc_tol must be positive")


class ImpulseEvent(NamedTuple):
    time: float
    signal: str
    order: int
    coefficient: float


@dataclass
class Trace:
    mode: str
    times: list[float] = field(default_factory=list)
    signals: dict[str, list[StepSample]] = field(default_factory=dict)
    impulses: list[ImpulseEvent] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def index_of(self, time: float) -> int:
        return self.times.index(time)

    def sample(self, signal: str, time: float) -> StepSample:
        return self.signals[signal][self.index_of(time)]

    def step_size(self, index: int) -> float:
        if index <= 0:
            raise ValueError("the initial step has no predecessor")
        return self.times[index] - self.times[index - 1]


# --- internal node table ---------------------------------------------------

@dataclass
class _Node:
    idx: int
    path: str
    kind: str
    params: dict[str, float]
    in_ports: tuple[str, ...]
    in_idx: tuple[int, ...]


_Sample = list  # [left, right, ImpulseVector], mutable while stepping


def _build_nodes(flat: FlatGraph) -> list[_Node]:
    index_of = {p: i for i, p in enumerate(flat.blocks)}
    nodes = []
    for path, block in flat.blocks.items():
        info = bk.KINDS[block.kind]
        if info.variadic:
            ports = tuple(sorted(block.inputs, key=lambda p: int(p[2:])))
        else:
            ports = info.inputs
        nodes.append(_Node(
            idx=index_of[path], path=path, kind=block.kind,
            params=block.params, in_ports=ports,
            in_idx=tuple(index_of[block.inputs[p]] for p in ports),
        ))
    return nodes


def _initial_states(nodes: list[_Node], history_depth: int) -> list:
    return [bk.initial_state(n.kind, n.params, history_depth) for n in nodes]


def _as_step_sample(cell: _Sample) -> StepSample:
    return StepSample(cell[0], cell[1], cell[2])


# --- linear loop solving ----------------------------------------------------

def _gauss_jordan(matrix: list[list[float]], rhs: list[float]) -> list[float]:
    n = len(rhs)
    a = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[pivot_row][col]) < SINGULAR_TOLERANCE:
            raise SingularLoop("algebraic loop system is singular")
        a[col], a[pivot_row] = a[pivot_row], a[col]
        pivot = a[col][col]
        a[col] = [value / pivot for value in a[col]]
        for row in range(n):
            if row != col and a[row][col] != 0.0:
                factor = a[row][col]
                a[row] = [rv - factor * cv for rv, cv in zip(a[row], a[col])]
    return [a[i][n] for i in range(n)]


def _solve_linear_members(nodes: list[_Node], members: Sequence[int],
                          known: Callable[[int], float]) -> dict[int, float]:
    """Solve one limit of an algebraic loop as a linear system."""
    position = {idx: j for j, idx in enumerate(members)}
    n = len(members)
    matrix = [[0.0] * n for _ in range(n)]
    rhs = [0.0] * n
    for row, idx in enumerate(members):
        node = nodes[idx]
        matrix[row][row] = 1.0
        if node.kind == "Adder":
            for dep in node.in_idx:
                if dep in position:
                    matrix[row][position[dep]] -= 1.0
                else:
                    rhs[row] += known(dep)
        elif node.kind == "Negator":
            dep = node.in_idx[0]
            if dep in position:
                matrix[row][position[dep]] += 1.0
            else:
                rhs[row] -= known(dep)
        elif node.kind == "Multiplier":
            loop_deps = [d for d in node.in_idx if d in position]
            if len(loop_deps) != 1:
                raise NonlinearLoop(
                    f"{node.path}: multiplier with {len(loop_deps)} in-loop inputs"
                )
            factor = math.prod(
                known(d) for d in node.in_idx if d not in position
            )
            matrix[row][position[loop_deps[0]]] -= factor
        else:
            raise NonlinearLoop(
                f"{node.path}: {node.kind} is not solvable inside an algebraic loop"
            )
    solution = _gauss_jordan(matrix, rhs)
    return {idx: solution[position[idx]] for idx in members}


def solve_linear_loop(flat: FlatGraph, members: Sequence[str],
                      known: dict[str, float]) -> dict[str, float]:
    """Solve the values of an algebraic loop given its external inputs.

    ``known`` maps producer paths outside the loop to their values; the
    returned mapping covers the loop members.  Raises ``NonlinearLoop``,
    ``SingularLoop`` or ``KeyError`` for an unknown external input.
    """
    nodes = _build_nodes(flat)
    index_of = {n.path: n.idx for n in nodes}
    member_idx = [index_of[p] for p in members]
    solution = _solve_linear_members(
        nodes, member_idx, lambda idx: known[nodes[idx].path]
    )
    return {nodes[idx].path: value for idx, value in solution.items()}


# --- the two-phase step -----------------------------------------------------

def _phase1_left(node: _Node, states: list, samples: list[_Sample],
                 dt: float) -> float:
    kind = node.kind
    if kind == "Constant":
        return node.params["value"]
    if kind == "Integrator":
        st = states[node.idx]
        if st.prev_input is None:
            return st.accumulator
        return st.accumulator + st.prev_input.right * dt
    if kind == "Delay":
        st = states[node.idx]
        return st.initial if st.prev_input is None else st.prev_input.left
    if kind == "Derivative":
        st = states[node.idx]
        if st.prev_input is None:
            return st.initial
        return (samples[node.in_idx[0]][0] - st.prev_input.right) / dt
    if kind == "Adder":
        total = samples[node.in_idx[0]][0]
        for i in node.in_idx[1:]:
            total += samples[i][0]
        return total
    if kind == "Negator":
        return -samples[node.in_idx[0]][0]
    if kind == "Multiplier":
        return math.prod(samples[i][0] for i in node.in_idx)
    if kind == "Inverter":
        value = samples[node.in_idx[0]][0]
        if abs(value) <= bk.DIV_TOLERANCE:
            raise bk.DivisionNearZero(f"inverter input magnitude {value!r} too small")
        return 1.0 / value
    if kind == "Switch":
        st = states[node.idx]
        cond_left = samples[node.in_idx[0]][0]
        return heaviside(cond_left) if st.prev_output is None else st.prev_output
    if kind == "Decision":
        st = states[node.idx]
        u, v, c = (samples[i] for i in node.in_idx)
        selects_u = (c[0] >= 0.0) if st.prev_selects_u is None else st.prev_selects_u
        return u[0] if selects_u else v[0]
    raise AssertionError(f"unhandled kind {kind}")


def _phase2(node: _Node, states: list, samples: list[_Sample],
            t: float, dt: float) -> tuple[float, ImpulseVector]:
    kind = node.kind
    cell = samples[node.idx]
    if kind == "Constant":
        return node.params["value"], EMPTY_IMPULSES
    if kind == "Adder":
        right = samples[node.in_idx[0]][1]
        vector = samples[node.in_idx[0]][2]
        for i in node.in_idx[1:]:
            right += samples[i][1]
            vector = add_vectors(vector, samples[i][2])
        return right, vector
    if kind == "Negator":
        src = samples[node.in_idx[0]]
        return -src[1], negate_vector(src[2])
    if kind == "Multiplier":
        right = math.prod(samples[i][1] for i in node.in_idx)
        if all(samples[i][2].is_empty for i in node.in_idx):
            return right, EMPTY_IMPULSES
        ins = [_as_step_sample(samples[i]) for i in node.in_idx]
        return right, bk._multiplier_impulses(ins, states[node.idx], t)
    if kind == "Inverter":
        src = samples[node.in_idx[0]]
        if not src[2].is_empty:
            raise bk.ImpulseOnInverter("cannot invert an impulse-carrying signal")
        if abs(src[1]) <= bk.DIV_TOLERANCE:
            raise bk.DivisionNearZero(f"inverter input magnitude {src[1]!r} too small")
        return 1.0 / src[1], EMPTY_IMPULSES
    if kind == "Integrator":
        src = samples[node.in_idx[0]]
        jump, rest = extract_order_zero(src[2])
        return cell[0] + jump, rest
    if kind == "Derivative":
        st = states[node.idx]
        if st.prev_input is None:
            return cell[0], EMPTY_IMPULSES
        src = samples[node.in_idx[0]]
        vector = shift_orders_up(src[2])
        if src[0] != src[1]:
            vector = add_vectors(vector, impulses({0: src[1] - src[0]}))
        return cell[0], vector
    if kind == "Switch":
        src = samples[node.in_idx[0]]
        if not src[2].is_empty:
            raise bk.ImpulseOnCondition("switch condition must be impulse-free")
        return heaviside(src[1]), EMPTY_IMPULSES
    if kind == "Decision":
        u, v, c = (samples[i] for i in node.in_idx)
        if not c[2].is_empty:
            raise bk.ImpulseOnCondition("decision condition must be impulse-free")
        st = states[node.idx]
        right_selects_u = c[1] >= 0.0
        left_selects_u = (c[0] >= 0.0) if st.prev_selects_u is None \
            else st.prev_selects_u
        if left_selects_u != right_selects_u:
            if not (u[2].is_empty and v[2].is_empty):
                raise bk.ImpulseAtSwitchingInstant(
                    "decision branches must be impulse-free while the selection flips"
                )
            vector = EMPTY_IMPULSES
        else:
            vector = (u if right_selects_u else v)[2]
        return (u if right_selects_u else v)[1], vector
    if kind == "Delay":
        st = states[node.idx]
        if st.prev_input is None:
            return st.initial, EMPTY_IMPULSES
        return st.prev_input.right, st.prev_input.impulses
    raise AssertionError(f"unhandled kind {kind}")


class Engine:
    """Owns the flattened graph, schedule and per-block states."""

    def __init__(self, flat: FlatGraph, config: SimConfig):
        self.flat = flat
        self.config = config
        self.nodes = _build_nodes(flat)
        schedule = flat.schedule or dependency_sort(flat)
        index_of = {n.path: n.idx for n in self.nodes}
        self.groups: list[tuple[tuple[int, ...], bool]] = [
            (tuple(index_of[p] for p in g.members), g.cyclic) for g in schedule
        ]
        self.states = _initial_states(self.nodes, config.history_depth)
        self.watchers = [
            n.idx for n in self.nodes if n.kind in ("Switch", "Decision")
        ]

    # -- stepping ------------------------------------------------------------

    def compute_step(self, states: list, t: float, dt: float) -> list[_Sample]:
        """Evaluate every block at time ``t`` for a step of size ``dt``."""
        nodes = self.nodes
        samples: list[_Sample] = [None] * len(nodes)  # type: ignore[list-item]

        def run_phase1(idx: int) -> None:
            node = nodes[idx]
            try:
                left = _phase1_left(node, states, samples, dt)
            except BlockError as err:
                raise SimulationError(node.path, err) from err
            samples[idx] = [left, left, EMPTY_IMPULSES]

        for members, cyclic in self.groups:
            if not cyclic:
                run_phase1(members[0])
                continue
            for idx in members:
                samples[idx] = [0.0, 0.0, EMPTY_IMPULSES]
            solved = self._solve_loop(members, states, samples, dt, side=0)
            for idx, value in solved.items():
                samples[idx][0] = value
                samples[idx][1] = value

        limit = len(nodes) + 2
        for _ in range(limit):
            changed = False
            for members, cyclic in self.groups:
                if cyclic:
                    changed |= self._phase2_loop(members, states, samples, dt)
                    continue
                idx = members[0]
                node = nodes[idx]
                try:
                    right, vector = _phase2(node, states, samples, t, dt)
                except BlockError as err:
                    raise SimulationError(node.path, err) from err
                cell = samples[idx]
                if right != cell[1] or vector != cell[2]:
                    cell[1] = right
                    cell[2] = vector
                    changed = True
            if not changed:
                break
        else:
            raise EngineError("impulse propagation failed to stabilise")

        max_order = self.config.max_order
        for idx, cell in enumerate(samples):
            if cell[2].max_order > max_order:
                raise MaxOrderExceeded(
                    f"{nodes[idx].path}: impulse order {cell[2].max_order} exceeds "
                    f"the configured maximum {max_order}"
                )
        return samples

    def _solve_loop(self, members: tuple[int, ...], states: list,
                    samples: list[_Sample], dt: float, side: int) -> dict[int, float]:
        member_set = set(members)
        for idx in members:
            node = self.nodes[idx]
            if node.kind not in ("Adder", "Negator", "Multiplier"):
                raise NonlinearLoop(
                    f"{node.path}: {node.kind} is not solvable inside an algebraic loop"
                )
            for dep in node.in_idx:
                if dep not in member_set and samples[dep] is None:
                    raise EngineError(
                        f"schedule violation: {self.nodes[dep].path} not ready"
                    )
        return _solve_linear_members(
            self.nodes, members, lambda dep: samples[dep][side]
        )

    def _phase2_loop(self, members: tuple[int, ...], states: list,
                     samples: list[_Sample], dt: float) -> bool:
        member_set = set(members)
        for idx in members:
            for dep in self.nodes[idx].in_idx:
                if not samples[dep][2].is_empty:
                    raise ImpulseInLoop(
                        f"{self.nodes[idx].path}: impulse entering an algebraic loop"
                    )
        solved = self._solve_loop(members, states, samples, dt, side=1)
        changed = False
        for idx, value in solved.items():
            if samples[idx][1] != value:
                samples[idx][1] = value
                changed = True
        return changed

    def commit(self, states: list, samples: list[_Sample], t: float) -> None:
        for node in self.nodes:
            kind = node.kind
            if kind == "Integrator":
                st = states[node.idx]
                st.accumulator = samples[node.idx][1]
                st.prev_input = _as_step_sample(samples[node.in_idx[0]])
            elif kind in ("Derivative", "Delay"):
                states[node.idx].prev_input = _as_step_sample(
                    samples[node.in_idx[0]]
                )
            elif kind == "Multiplier":
                states[node.idx].record(
                    t, tuple(samples[i][0] for i in node.in_idx)
                )
            elif kind == "Switch":
                states[node.idx].prev_output = samples[node.idx][1]
            elif kind == "Decision":
                states[node.idx].prev_selects_u = (
                    samples[node.in_idx[2]][1] >= 0.0
                )

    # -- event handling --------------------------------------------------------

    def flipped_conditions(self, samples: list[_Sample]) -> list[int]:
        """Condition blocks whose sign changed relative to the committed state.

        The test compares the trial's condition left limit against the
        previously committed output, so jumps that happen inside a committed
        sample (consequences of an event, not causes) do not re-trigger
        location.
        """
        flipped = []
        for idx in self.watchers:
            node = self.nodes[idx]
            st = self.states[idx]
            cond_left = samples[node.in_idx[-1]][0]
            if node.kind == "Switch":
                if st.prev_output is not None and \
                        heaviside(cond_left) != st.prev_output:
                    flipped.append(idx)
            else:
                if st.prev_selects_u is not None and \
                        (cond_left >= 0.0) != st.prev_selects_u:
                    flipped.append(idx)
        return flipped

    def _condition_magnitude(self, samples: list[_Sample],
                             flipped: list[int]) -> float:
        return max(
            abs(samples[self.nodes[idx].in_idx[-1]][0]) for idx in flipped
        )

    def locate_crossing(self, t: float, h: float,
                        trial: list[_Sample] | None = None,
                        ) -> tuple[float, list[_Sample], bool]:
        """Bisect the trial step onto the earliest condition crossing.

        Returns the located step size, the samples of the step at that
        size, and whether the bisection bottomed out at ``h_min`` without
        reaching the value tolerance (the step is committed regardless).
        """
        cfg = self.config
        if trial is None:
            trial = self.compute_step(self.states, t + h, h)
        flipped = self.flipped_conditions(trial)
        if not flipped:
            raise EngineError("locate_crossing called without a sign change")
        lo, hi = 0.0, h
        samples_hi, flipped_hi = trial, flipped
        while self._condition_magnitude(samples_hi, flipped_hi) > cfg.zc_tol \
                and (hi - lo) > cfg.h_min:
            mid = 0.5 * (lo + hi)
            if not (lo < mid < hi):
                break
            candidate = self.compute_step(self.states, t + mid, mid)
            flipped_mid = self.flipped_conditions(candidate)
            if flipped_mid:
                hi, samples_hi, flipped_hi = mid, candidate, flipped_mid
            else:
                lo = mid
        if hi < cfg.h_min:
            hi = cfg.h_min
            samples_hi = self.compute_step(self.states, t + hi, hi)
            flipped_hi = self.flipped_conditions(samples_hi) or flipped_hi
        underflow = self._condition_magnitude(samples_hi, flipped_hi) > cfg.zc_tol
        return hi, samples_hi, underflow


# --- trace recording --------------------------------------------------------

class _Recorder:
    def __init__(self, config: SimConfig, watched: dict[str, int]):
        self.mode = config.mode
        self.watched = watched
        self.trace = Trace(mode=config.mode)
        for name in watched:
            self.trace.signals[name] = []
        self._pending: dict[str, list[list]] = {name: [] for name in watched}

    def record(self, t: float, samples: list[_Sample], dt: float) -> None:
        trace = self.trace
        if trace.times:
            # Use the committed time difference so a spike value divided by
            # the step size reconstructs exactly from the recorded times.
            dt = t - trace.times[-1]
        trace.times.append(t)
        for name, idx in self.watched.items():
            cell = samples[idx]
            if self.mode == bk.SYMBOLIC:
                trace.signals[name].append(_as_step_sample(cell))
                for order, coefficient in cell[2].items():
                    trace.impulses.append(
                        ImpulseEvent(t, name, order, coefficient)
                    )
                continue
            due = 0.0
            remaining = []
            for entry in self._pending[name]:
                if entry[0] == 1:
                    due += entry[1]
                else:
                    remaining.append([entry[0] - 1, entry[1]])
            self._pending[name] = remaining
            for order, coefficient in cell[2].items():
                scale = dt ** (order + 1)
                for m in range(order + 1):
                    amount = coefficient * (-1.0) ** m * math.comb(order, m) / scale
                    if m == 0:
                        due += amount
                    else:
                        self._pending[name].append([m, amount])
            left = cell[0] + due
            right = cell[1] + due
            if abs(left) > OVERFLOW_LIMIT or abs(right) > OVERFLOW_LIMIT:
                message = f"overflow-risk: |{name}| exceeds {OVERFLOW_LIMIT:g} at t={t!r}"
                if message not in trace.warnings:
                    trace.warnings.append(message)
            trace.signals[name].append(StepSample(left, right, EMPTY_IMPULSES))


def resolve_watches(flat: FlatGraph, watch: Sequence[str]) -> dict[str, int]:
    """Map requested signal names to node indices.

    Top-level output port names and flattened block paths are both
    accepted; an empty request watches all top-level output ports.
    """
    index_of = {path: i for i, path in enumerate(flat.blocks)}
    if not watch:
        return {name: index_of[path] for name, path in flat.outputs.items()}
    resolved = {}
    for name in watch:
        if name in flat.outputs:
            resolved[name] = index_of[flat.outputs[name]]
        elif name in index_of:
            resolved[name] = index_of[name]
        else:
            raise ModelError(f"unknown watched signal {name!r}")
    return resolved


def simulate(model: Model, top: str, config: SimConfig) -> Trace:
    """Flatten, schedule and run the model until the end time.

    The first committed step is the initial instant t = 0; thereafter the
    loop takes nominal steps of size ``h``, shortened by bisection whenever
    a Switch or Decision condition changes sign, so that committed steps
    land on crossing times within the configured tolerance.
    """
    flat = flatten(model, top)
    flat.schedule = dependency_sort(flat)
    engine = Engine(flat, config)
    recorder = _Recorder(config, resolve_watches(flat, config.watch))

    t = 0.0
    samples = engine.compute_step(engine.states, t, config.h)
    engine.commit(engine.states, samples, t)
    recorder.record(t, samples, config.h)

    consecutive_located = 0
    window_start = 0.0
    end_slack = config.t_end + 1e-9 * config.h
    while t + config.h <= end_slack:
        trial = engine.compute_step(engine.states, t + config.h, config.h)
        flipped = engine.flipped_conditions(trial)
        if flipped:
            h_star, samples, underflow = engine.locate_crossing(
                t, config.h, trial
            )
            if underflow:
                recorder.trace.warnings.append(
                    f"step-underflow: tolerance not met at t={t + h_star!r}"
                )
            if consecutive_located == 0:
                window_start = t
            consecutive_located += 1
        else:
            h_star, samples = config.h, trial
            consecutive_located = 0
        t_new = t + h_star
        if t_new <= t:
            raise EngineError("step size underflowed the time resolution")
        engine.commit(engine.states, samples, t_new)
        recorder.record(t_new, samples, h_star)
        if consecutive_located >= ZENO_WINDOW and \
                (t_new - window_start) <= ZENO_WINDOW * config.h_min * (1 + 1e-9):
            raise ZenoSuspected(
                f"{consecutive_located} consecutive event-located steps "
                f"advanced only {t_new - window_start!r}s"
            )
        t = t_new
    return recorder.trace


def step(flat: FlatGraph, config: SimConfig, states: list | None = None,
         t: float = 0.0, dt: float | None = None):
    """Single-step entry point for driving a flat graph directly.

    Returns ``(samples, states)`` where samples maps block paths to
    StepSamples; states are updated in place when provided.
    """
    if not flat.schedule:
        flat.schedule = dependency_sort(flat)
    engine = Engine(flat, config)
    if states is not None:
        engine.states = states
    dt = config.h if dt is None else dt
    cells = engine.compute_step(engine.states, t, dt)
    engine.commit(engine.states, cells, t)
    named = {
        node.path: _as_step_sample(cells[node.idx]) for node in engine.nodes
    }
    return named, engine.states


def locate_crossing(flat: FlatGraph, config: SimConfig, states: list,
                    t: float, h: float) -> tuple[float, bool]:
    """Locate the earliest condition crossing inside a trial step.

    ``states`` must be the committed block states at time ``t``; they are
    not modified.  Returns the located step size and whether the bisection
    bottomed out at ``h_min`` before meeting the value tolerance.
    """
    if not flat.schedule:
        flat.schedule = dependency_sort(flat)
    engine = Engine(flat, config)
    engine.states = states
    h_star, _, underflow = engine.locate_crossing(t, h)
    return h_star, underflow
