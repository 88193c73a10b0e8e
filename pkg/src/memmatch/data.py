"""Sequence/label datasets: TSV and FASTA I/O, PWMs, and a planted-motif generator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FormatError, InputError, ParseError
from .model import ALPHABET, encode_codes

log = logging.getLogger(__name__)

_VALID = set("ACGTN")
UNIFORM = (0.25, 0.25, 0.25, 0.25)


@dataclass(frozen=True)
class SequenceRecord:
    seq: str
    label: int
    planted_span: Optional[tuple] = None


@dataclass
class Dataset:
    records: list
    t: int
    name: str = "dataset"
    _codes: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for i, r in enumerate(self.records):
            if len(r.seq) != self.t:
                raise FormatError(f"record {i} has length {len(r.seq)}, expected {self.t}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def labels(self):
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def codes(self):
        """``(n, t)`` integer matrix (A,C,G,T,N -> 0..4), cached."""
        if self._codes is None:
            if self.records:
                self._codes = np.stack([encode_codes(r.seq) for r in self.records])
            else:
                self._codes = np.zeros((0, self.t), dtype=np.int64)
        return self._codes

    def counts(self):
        n_pos = int(self.labels.sum())
        return n_pos, len(self) - n_pos

    def subset(self, idx, name=None):
        return Dataset([self.records[i] for i in idx], self.t, name or self.name)


@dataclass(frozen=True)
class PWM:
    """Per-position base probabilities, rows in A,C,G,T order."""

    probs: np.ndarray  # (width, 4)
    background: tuple = UNIFORM
    name: str = "motif"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] != 4 or probs.shape[0] < 1:
            raise InputError(f"PWM must be width x 4, got shape {probs.shape}")
        if (probs < 0).any() or not np.allclose(probs.sum(axis=1), 1.0, atol=1e-9):
            raise InputError("PWM columns must be non-negative and sum to 1")
        if abs(sum(self.background) - 1.0) > 1e-9:
            raise InputError("PWM background must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def width(self):
        return self.probs.shape[0]

    def consensus(self):
        return "".join(ALPHABET[i] for i in self.probs.argmax(axis=1))


def consensus_pwm(consensus, pseudo=0.05, name=None):
    """Consensus base gets ``1 - 3*pseudo``, every other base ``pseudo``."""
    consensus = consensus.upper()
    for i, c in enumerate(consensus):
        if c not in ALPHABET:
            raise InputError(f"invalid consensus character {c!r} at position {i}")
    probs = np.full((len(consensus), 4), pseudo)
    probs[np.arange(len(consensus)), [ALPHABET.index(c) for c in consensus]] = 1.0 - 3.0 * pseudo
    return PWM(probs, name=name or consensus)


def _check_seq(seq, line):
    for i, c in enumerate(seq):
        if c not in _VALID:
            raise ParseError(f"invalid character {c!r}", line=line, position=i)


def _finish(records, name, lines):
    if not records:
        raise FormatError(f"{name}: no records")
    t = len(records[0].seq)
    for rec, line in zip(records, lines):
        if len(rec.seq) != t:
            raise FormatError(f"{name}: line {line} has length {len(rec.seq)}, expected {t}")
    ds = Dataset(records, t, name)
    n_pos, n_neg = ds.counts()
    if n_pos != n_neg:
        log.warning("%s: class imbalance, %d positive / %d negative", name, n_pos, n_neg)
    else:
        log.info("%s: %d positive / %d negative", name, n_pos, n_neg)
    return ds


def _parse_label(text, line):
    if text not in ("0", "1"):
        raise ParseError(f"label must be 0 or 1, got {text!r}", line=line)
    return int(text)


def load_tsv(path, name=None):
    records, lines = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.rstrip("\r\n")
            if not raw:
                continue
            parts = raw.split("\t")
            if len(parts) != 2:
                raise ParseError("expected SEQUENCE<TAB>LABEL", line=lineno)
            seq = parts[0].strip().upper()
            _check_seq(seq, lineno)
            records.append(SequenceRecord(seq, _parse_label(parts[1].strip(), lineno)))
            lines.append(lineno)
    return _finish(records, name or str(path), lines)


def load_fasta(path, name=None):
    records, lines = [], []
    header = None
    chunks = []

    def flush():
        if header is None:
            return
        hline, label = header
        seq = "".join(chunks).upper()
        _check_seq(seq, hline)
        records.append(SequenceRecord(seq, label))
        lines.append(hline)

    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            if raw.startswith(">"):
                flush()
                tail = raw.rsplit(None, 1)[-1]
                if not tail.startswith("label="):
                    raise ParseError("FASTA header must end with label=0|1", line=lineno)
                header = (lineno, _parse_label(tail[len("label="):], lineno))
                chunks = []
            else:
                if header is None:
                    raise ParseError("sequence data before first header", line=lineno)
                chunks.append(raw)
    flush()
    return _finish(records, name or str(path), lines)


def load_dataset(path, format="tsv", name=None):
    if format == "tsv":
        return load_tsv(path, name)
    if format == "fasta":
        return load_fasta(path, name)
    raise InputError(f"unknown dataset format {format!r}")


def save_dataset(ds, path, format="tsv"):
    with open(path, "w", newline="\n") as fh:
        if format == "tsv":
            for r in ds.records:
                fh.write(f"{r.seq}\t{r.label}\n")
        elif format == "fasta":
            for i, r in enumerate(ds.records):
                fh.write(f">seq{i} label={r.label}\n{r.seq}\n")
        else:
            raise InputError(f"unknown dataset format {format!r}")


def generate_synthetic(motifs, n, t, plant_rate, seed, background=UNIFORM, name="synthetic"):
    """Half background-only negatives, half positives carrying one planted motif.

    Each positive receives, with probability ``plant_rate``, one motif chosen
    uniformly from ``motifs``, sampled column-wise from its probabilities and
    written at a uniform offset. Record order is shuffled.
    """
    if n % 2:
        raise InputError(f"n must be even, got {n}")
    if not 0.0 <= plant_rate <= 1.0:
        raise InputError(f"plant_rate must lie in [0, 1], got {plant_rate}")
    for mot in motifs:
        if mot.width > t:
            raise InputError(f"motif {mot.name!r} of width {mot.width} exceeds sequence length {t}")
    if plant_rate > 0 and not motifs:
        raise InputError("plant_rate > 0 needs at least one motif")

    rng = np.random.default_rng(seed)
    half = n // 2
    bases = np.array(list(ALPHABET))
    codes = rng.choice(4, size=(n, t), p=np.asarray(background, dtype=np.float64))
    labels = np.repeat([0, 1], half)
    spans = [None] * n
    for i in range(half, n):
        if rng.random() >= plant_rate:
            continue
        mot = motifs[rng.integers(len(motifs))]
        start = int(rng.integers(t - mot.width + 1))
        cum = mot.probs.cumsum(axis=1)
        draws = rng.random(mot.width)
        codes[i, start : start + mot.width] = np.minimum((draws[:, None] > cum).sum(axis=1), 3)
        spans[i] = (start, start + mot.width)
    order = rng.permutation(n)
    records = [
        SequenceRecord("".join(bases[codes[i]]), int(labels[i]), spans[i]) for i in order
    ]
    return Dataset(records, t, name)


def split(ds, fraction, seed):
    """Seeded ``(rest, held_out)`` split holding out ``fraction`` of each class.

    Every class with at least two records keeps one on each side, so a
    held-out AUC is always defined.
    """
    rng = np.random.default_rng(seed)
    labels = ds.labels
    held = []
    for c in (0, 1):
        members = rng.permutation(np.flatnonzero(labels == c))
        k = int(round(fraction * len(members)))
        if len(members) >= 2:
            k = min(max(k, 1), len(members) - 1)
        held.extend(members[:k])
    held = np.sort(np.asarray(held, dtype=np.int64))
    rest = np.setdiff1d(np.arange(len(ds)), held)
    return ds.subset(rest, ds.name + ":train"), ds.subset(held, ds.name + ":val")


# --- PWM text format: ">name width=K" then K lines of A C G T probabilities ---

def write_pwm(pwm, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(f">{pwm.name} width={pwm.width}\n")
        for row in pwm.probs:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def read_pwm(path):
    with open(path) as fh:
        lines = [ln.rstrip("\r\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith(">"):
        raise ParseError("PWM file must start with '>name width=K'", line=1)
    head = lines[0][1:].split()
    if not head or not head[-1].startswith("width="):
        raise ParseError("PWM header missing width=K", line=1)
    width = int(head[-1][len("width="):])
    name = " ".join(head[:-1]) or "motif"
    rows = []
    for lineno, ln in enumerate(lines[1:], 2):
        parts = ln.split("\t")
        if len(parts) != 4:
            raise ParseError("PWM row needs 4 tab-separated probabilities", line=lineno)
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise ParseError("non-numeric PWM entry", line=lineno) from None
    if len(rows) != width:
        raise FormatError(f"PWM declares width {width} but has {len(rows)} rows")
    return PWM(np.array(rows), name=name)
