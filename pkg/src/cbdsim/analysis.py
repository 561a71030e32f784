"""Quantitative analysis: difference tables, magnitude bounds, trace diffs.

The finite-difference table answers "what does a chain of backward
differences do to a unit step": column 0 is the step stream itself and
every further column divides the previous one's backward difference by the
step size.  Column n is the numerical image of the impulse derivative of
order n - 1; its nonzero support spans exactly n steps, which is what
limits how faithfully plain value streams can carry impulse derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from .engine import ImpulseEvent, Trace


class TimeGridMismatch(ValueError):
    """Compared traces committed different time grids."""


@dataclass(frozen=True)
class DiffTable:
    """Backward-difference cascade of a unit step.

    Rows are step offsets m = -1 .. n relative to the step time, columns
    are derivative orders 0 .. n.  Row m = -1 is all zeros and column 0 is
    the unit step stream.
    """

    order: int
    h: float
    columns: tuple[tuple[float, ...], ...]

    def value(self, m: int, k: int) -> float:
        if not -1 <= m <= self.order:
            raise IndexError(f"offset {m} outside -1..{self.order}")
        return self.columns[k][m + 1]

    def column(self, k: int) -> tuple[float, ...]:
        return self.columns[k]

    @property
    def offsets(self) -> range:
        return range(-1, self.order + 1)


def finite_difference_table(n: int, h: float) -> DiffTable:
    """Cascade the backward-difference operator over a unit step.

    The values are computed by actually running the cascade rather than by
    evaluating the binomial closed form, mirroring what a chain of
    difference blocks does; the closed form
    ``(-1)**m * C(n-1, m) / h**n`` is what tests check the result against.
    """
    if n < 0:
        raise ValueError("order must be non-negative")
    if not h > 0.0:
        raise ValueError("step size must be positive")
    rows = n + 2  # offsets -1 .. n
    column = tuple(0.0 if m == 0 else 1.0 for m in range(rows))
    columns = [column]
    for _ in range(n):
        previous = columns[-1]
        column = tuple(
            (previous[i] - (previous[i - 1] if i > 0 else 0.0)) / h
            for i in range(rows)
        )
        columns.append(column)
    return DiffTable(order=n, h=h, columns=tuple(columns))


@dataclass(frozen=True)
class MagnitudeEstimate:
    value: float
    overflow_risk: bool


OVERFLOW_THRESHOLD = 1e300


def max_magnitude(n: int, h: float, amplitude: float) -> MagnitudeEstimate:
    """Largest absolute value a difference cascade of depth n can produce.

    Scans the cascade table directly and scales by the largest
    discontinuity amplitude ``D``; flags (but does not reject) results that
    approach the double-precision ceiling.
    """
    if n < 1:
        raise ValueError("order must be at least 1")
    if not h > 0.0:
        raise ValueError("step size must be positive")
    if amplitude < 0.0:
        raise ValueError("amplitude must be non-negative")
    table = finite_difference_table(n, h)
    peak = max(abs(v) for v in table.column(n))
    value = amplitude * peak
    return MagnitudeEstimate(value=value, overflow_risk=value > OVERFLOW_THRESHOLD)


def halforder_magnitude_estimate(n: int, h: float, amplitude: float) -> float:
    """Alternative closed-form estimate ``D / h**(n // 2)``.

    Kept alongside the exact table scan because the two disagree for
    n >= 2; both are reported by the command line so the difference stays
    visible.
    """
    k = n // 2
    return amplitude * math.comb(max(k - 1, 0), max(k - 1, 0)) / h ** k


# --- trace comparison ---------------------------------------------------------


@dataclass
class SignalDeviation:
    signal: str
    max_relative: float
    at_time: float | None


@dataclass
class ImpulseCheck:
    event: ImpulseEvent
    expected: float
    actual: float
    relative_error: float
    ok: bool


@dataclass
class CompareReport:
    ok: bool
    rel_tol: float
    deviations: list[SignalDeviation] = field(default_factory=list)
    impulse_checks: list[ImpulseCheck] = field(default_factory=list)
    findings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "rel_tol": self.rel_tol,
            "deviations": [
                {"signal": d.signal, "max_relative": d.max_relative,
                 "at_time": d.at_time}
                for d in self.deviations
            ],
            "impulse_checks": [
                {"time": c.event.time, "signal": c.event.signal,
                 "order": c.event.order, "coefficient": c.event.coefficient,
                 "expected": c.expected, "actual": c.actual,
                 "relative_error": c.relative_error, "ok": c.ok}
                for c in self.impulse_checks
            ],
            "findings": self.findings,
        }


def _relative(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    if scale == 0.0:
        return 0.0
    return abs(x - y) / scale


def compare_traces(a: Trace, b: Trace, rel_tol: float = 1e-12) -> CompareReport:
    """Align two traces on their committed times and measure deviations.

    Steps carrying logged impulses are excluded from the plain stream
    comparison; each order-0 impulse is instead checked as a spike of
    ``coefficient / h*`` in the trace without a log, where ``h*`` is the
    size of the step landing on the impulse time.  Higher orders are
    reported as expected-delay findings, since their value-stream encoding
    spreads over following steps.
    """
    if set(a.signals) != set(b.signals):
        raise ValueError("traces watch different signals")
    if len(a.times) != len(b.times) or any(
        x != y for x, y in zip(a.times, b.times)
    ):
        raise TimeGridMismatch("committed time grids differ")

    excluded = {(e.signal, e.time) for e in a.impulses}
    excluded |= {(e.signal, e.time) for e in b.impulses}

    report = CompareReport(ok=True, rel_tol=rel_tol)
    for name in a.signals:
        worst = 0.0
        worst_time: float | None = None
        for i, t in enumerate(a.times):
            if (name, t) in excluded:
                continue
            sa, sb = a.signals[name][i], b.signals[name][i]
            deviation = max(_relative(sa.left, sb.left),
                            _relative(sa.right, sb.right))
            if deviation > worst:
                worst, worst_time = deviation, t
        report.deviations.append(SignalDeviation(name, worst, worst_time))
        if worst > rel_tol:
            report.ok = False

    if a.impulses and b.impulses:
        _match_logs(a, b, rel_tol, report)
    elif a.impulses or b.impulses:
        logged, plain = (a, b) if a.impulses else (b, a)
        _check_spikes(logged, plain, rel_tol, report)
    return report


def _match_logs(a: Trace, b: Trace, rel_tol: float, report: CompareReport) -> None:
    keyed_b = {(e.time, e.signal, e.order): e for e in b.impulses}
    for event in a.impulses:
        other = keyed_b.pop((event.time, event.signal, event.order), None)
        if other is None:
            report.findings.append(
                f"impulse {event} has no counterpart in the second trace"
            )
            report.ok = False
            continue
        error = _relative(event.coefficient, other.coefficient)
        report.impulse_checks.append(ImpulseCheck(
            event, event.coefficient, other.coefficient, error,
            ok=error <= rel_tol,
        ))
        if error > rel_tol:
            report.ok = False
    for event in keyed_b.values():
        report.findings.append(
            f"impulse {event} has no counterpart in the first trace"
        )
        report.ok = False


def _check_spikes(logged: Trace, plain: Trace, rel_tol: float,
                  report: CompareReport) -> None:
    for event in logged.impulses:
        index = logged.times.index(event.time)
        if event.order > 0:
            report.findings.append(
                f"order-{event.order} impulse on {event.signal!r} at "
                f"t={event.time!r}: the value-stream encoding spreads over "
                f"{event.order + 1} steps (a {event.order} step delay)"
            )
            continue
        if index == 0:
            report.findings.append(
                f"impulse at the initial step cannot be checked: {event}"
            )
            report.ok = False
            continue
        h_star = logged.times[index] - logged.times[index - 1]
        expected = event.coefficient / h_star
        base = logged.signals[event.signal][index]
        value = plain.signals[event.signal][index]
        actual = value.left - base.left
        error = _relative(expected, actual)
        report.impulse_checks.append(ImpulseCheck(
            event, expected, actual, error, ok=error <= rel_tol,
        ))
        if error > rel_tol:
            report.ok = False


# --- closed-form bouncing ball -------------------------------------------------


def analytic_bouncing_ball(y0: float, v0: float, g: float, t: float,
                           restitution: float = 1.0,
                           ) -> tuple[float, float, tuple[float, ...]]:
    """Closed-form ballistic flight with velocity reflection at contacts.

    Each flight segment is the parabola ``y = y0 + v0 tau - g tau^2 / 2``;
    contact times are its positive quadratic roots and every contact
    reflects the velocity scaled by the restitution factor.  Returns the
    position and velocity at ``t`` plus all bounce times up to ``t``.
    """
    if not (y0 > 0.0 and g > 0.0):
        raise ValueError("need y0 > 0 and g > 0")
    if not t >= 0.0:
        raise ValueError("time must be non-negative")
    bounces: list[float] = []
    t0, y, v = 0.0, y0, v0
    while True:
        tau_c = (v + math.sqrt(v * v + 2.0 * g * y)) / g
        if t0 + tau_c > t:
            tau = t - t0
            return y + v * tau - 0.5 * g * tau * tau, v - g * tau, tuple(bounces)
        t0 += tau_c
        bounces.append(t0)
        v = -restitution * (v - g * tau_c)
        y = 0.0
        if v <= 0.0:
            # Fully damped: the ball stays on the floor from here on.
            return 0.0, 0.0, tuple(bounces)
