"""ROC-AUC, cross-dataset summaries, paired t-test, and attention trace export/rendering."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass
from decimal import Decimal
from html import escape
from typing import Optional

import numpy as np

from .errors import DomainError, InputError
from .kernels import average_ranks


def roc_auc(scores, labels):
    """Mann-Whitney AUC; a tied positive/negative pair counts one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise InputError(f"{len(scores)} scores for {len(labels)} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("roc_auc needs at least one positive and one negative")
    ranks = average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class AucSummary:
    mean: float
    median: float
    stdev: float
    per_dataset: list

    def format_row(self, model="model"):
        return f"{model:<12} {self.mean:>8.3f} {self.median:>10.3f} {self.stdev:>7.3f}"


def aggregate(aucs):
    """Mean, median and sample standard deviation of ``(name, auc)`` pairs.

    Arithmetic runs in decimal on the shortest repr of each value, so inputs
    written with few digits give exactly rounded summaries.
    """
    aucs = list(aucs)
    if not aucs:
        raise InputError("aggregate needs at least one AUC")
    vals = [Decimal(repr(float(a))) for _, a in aucs]
    stdev = statistics.stdev(vals) if len(vals) > 1 else Decimal(0)
    return AucSummary(
        mean=float(statistics.mean(vals)),
        median=float(statistics.median(vals)),
        stdev=float(stdev),
        per_dataset=[(name, float(a)) for name, a in aucs],
    )


def format_table(summaries):
    """Table of ``{model: AucSummary}`` with Mean/Median/Stdev columns."""
    lines = [f"{'Model':<12} {'Mean AUC':>8} {'Median AUC':>10} {'Stdev':>7}"]
    lines += [summary.format_row(model) for model, summary in summaries.items()]
    return "\n".join(lines)


# --- paired t-test ------------------------------------------------------------

def _betacf(a, b, x, max_iter=500, tol=1e-15):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def paired_ttest(a, b):
    """Paired two-sided t-test on ``a - b``; returns ``(t, p)``.

    Zero-variance differences give ``(+-inf, 0.0)`` when their mean is
    nonzero and ``(0.0, 1.0)`` when it is zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"paired_ttest needs equal-length 1-D samples, got {a.shape} and {b.shape}")
    n = len(a)
    if n < 2:
        raise InputError("paired_ttest needs n >= 2")
    diff = a - b
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = float(mean * math.sqrt(n) / sd)
    return t, t_sf_two_sided(t, n - 1)


# --- attention trace export ---------------------------------------------------

@dataclass
class TraceExport:
    sequence: str
    alpha: list
    memory_weights: list
    prediction: float
    label: Optional[int] = None

    def to_json(self):
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        exp = cls(**doc)
        _check_export(exp)
        return exp


def _check_export(exp):
    if len(exp.alpha) != len(exp.sequence):
        raise InputError(f"alpha has {len(exp.alpha)} entries for a sequence of {len(exp.sequence)}")
    for name, v in (("alpha", exp.alpha), ("memory_weights", exp.memory_weights)):
        if v and abs(math.fsum(v) - 1.0) > 1e-6:
            raise InputError(f"{name} does not sum to 1")


def export_trace(record, trace):
    """Bundle a forward trace with its sequence. ``record`` is a SequenceRecord or str."""
    seq = record if isinstance(record, str) else record.seq
    label = None if isinstance(record, str) else record.label
    if len(trace.alpha) != len(seq):
        raise RuntimeError(f"trace covers {len(trace.alpha)} positions, sequence has {len(seq)}")
    exp = TraceExport(
        sequence=seq,
        alpha=[float(x) for x in trace.alpha],
        memory_weights=[float(x) for x in getattr(trace, "w", [])],
        prediction=float(trace.y[1]),
        label=label,
    )
    _check_export(exp)
    return exp


CELL = 14
_SAT = (178, 24, 43)


def _shade(value, lo, hi):
    frac = 0.0 if hi <= lo else (value - lo) / (hi - lo)
    rgb = [round(255 + frac * (c - 255)) for c in _SAT]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap(export):
    """SVG with an attention row (one cell per character) and a memory-weight row."""
    _check_export(export)
    t = len(export.sequence)
    ell = len(export.memory_weights)
    width = max(t, ell) * CELL + 2 * CELL
    height = 5 * CELL
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="{CELL - 4}">',
        f'<text x="{CELL}" y="{CELL - 3}">p(positive)={export.prediction:.4f}</text>',
        '<g class="alpha">',
    ]
    lo, hi = min(export.alpha), max(export.alpha)
    for j, (ch, a) in enumerate(zip(export.sequence, export.alpha)):
        x = CELL + j * CELL
        out.append(
            f'<rect class="char-cell" x="{x}" y="{CELL}" width="{CELL}" height="{CELL}" '
            f'fill="{_shade(a, lo, hi)}"><title>{j}:{a:.6g}</title></rect>'
        )
        out.append(
            f'<text class="char" x="{x + CELL // 2}" y="{2 * CELL - 3}" '
            f'text-anchor="middle">{escape(ch)}</text>'
        )
    out.append("</g>")
    out.append('<g class="memory">')
    if ell:
        lo, hi = min(export.memory_weights), max(export.memory_weights)
        for i, w in enumerate(export.memory_weights):
            x = CELL + i * CELL
            out.append(
                f'<rect class="mem-cell" x="{x}" y="{3 * CELL}" width="{CELL}" height="{CELL}" '
                f'fill="{_shade(w, lo, hi)}"><title>M{i + 1}:{w:.6g}</title></rect>'
            )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
