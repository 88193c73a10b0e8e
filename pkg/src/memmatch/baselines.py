"""Comparison models: PWM log-odds scanning and the memory-free attention-LSTM."""

from __future__ import annotations

import numpy as np

from .data import PWM
from .errors import InputError
from .kernels import pwm_scan
from .model import ModelParams, encode_codes, lstm_baseline_forward  # noqa: F401 - re-export

PROB_FLOOR = 1e-9


def log_odds(pwm):
    """``(width, 5)`` table of log(p / background); column 4 (N) is zero."""
    bg = np.asarray(pwm.background, dtype=np.float64)
    table = np.zeros((pwm.width, 5))
    table[:, :4] = np.log(np.maximum(pwm.probs, PROB_FLOOR) / bg)
    return table


def pwm_scan_codes(codes, pwm):
    """Best-window scores and offsets for an ``(n, t)`` code matrix."""
    codes = np.atleast_2d(codes)
    if codes.shape[1] < pwm.width:
        raise InputError(f"sequence length {codes.shape[1]} shorter than motif width {pwm.width}")
    return pwm_scan(codes, log_odds(pwm))


def pwm_score(seq, pwm):
    """Maximum window log-odds score of ``seq`` under ``pwm``."""
    if len(seq) < pwm.width:
        raise InputError(f"sequence length {len(seq)} shorter than motif width {pwm.width}")
    scores, _ = pwm_scan_codes(encode_codes(seq)[None, :], pwm)
    return float(scores[0])


def _column_probs(windows, pseudo):
    counts = np.stack([(windows == b).sum(axis=0) for b in range(4)], axis=1).astype(np.float64)
    return (counts + pseudo) / (counts.sum(axis=1, keepdims=True) + 4 * pseudo)


def pwm_fit(positives, width, pseudo=0.5, iterations=2, background=(0.25, 0.25, 0.25, 0.25)):
    """Count-and-refine motif estimate from positive sequences.

    Seeds from the most frequent N-free ``width``-mer across all windows of
    all positives, then for ``iterations`` rounds picks each record's best
    window under the current PWM and re-estimates pseudo-count-smoothed
    column frequencies from those windows.
    """
    codes = positives.codes if hasattr(positives, "codes") else np.atleast_2d(positives)
    if len(codes) == 0:
        raise InputError("pwm_fit needs at least one positive sequence")
    if width < 1 or width > codes.shape[1]:
        raise InputError(f"motif width {width} outside [1, {codes.shape[1]}]")

    windows = np.lib.stride_tricks.sliding_window_view(codes, width, axis=1).reshape(-1, width)
    clean = windows[(windows < 4).all(axis=1)]
    if len(clean) == 0:
        raise InputError("no N-free windows to seed the motif")
    words, counts = np.unique(clean, axis=0, return_counts=True)
    seed_word = words[counts.argmax()]
    probs = _column_probs(seed_word[None, :], pseudo)
    pwm = PWM(probs, background)
    for _ in range(iterations):
        _, offsets = pwm_scan(codes, log_odds(pwm))
        picked = codes[np.arange(len(codes))[:, None], offsets[:, None] + np.arange(width)]
        pwm = PWM(_column_probs(picked, pseudo), background)
    return PWM(pwm.probs, background, name=pwm.consensus())
