"""Memory matching network: attention-LSTM encoders, cosine memory matching, read, classify.

Tensors are position-major: a batch of sequences is ``(batch, t, features)``.
The memory bank is stored as ``(ell, p, t)`` (one ``p x t`` matrix per memory).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, InputError

ALPHABET = "ACGT"
# 'N' maps to index 4, a zero row of the one-hot matrix
_CODE = {c: i for i, c in enumerate(ALPHABET)}
_CODE["N"] = 4

DEFAULT_ELL = (2, 4, 8, 16)
DEFAULT_P = (2, 4, 8, 16)
DEFAULT_D = (32, 64, 128)

# module switch: False routes every LSTM through primitive ops
FUSED_LSTM = True


@dataclass(frozen=True)
class HyperParams:
    ell: int = 4
    p: int = 4
    d: int = 32
    t: int = 101

    def __post_init__(self):
        if self.ell < 1 or self.p < 1 or self.t < 1:
            raise InputError(f"ell, p and t must be positive: {self}")
        if self.d < 2 or self.d % 2:
            raise InputError(f"d must be even and >= 2, got {self.d}")

    @property
    def h(self):
        return self.d // 2


@dataclass
class ForwardTrace:
    """Per-sequence intermediates of one forward pass (numpy arrays)."""

    s: np.ndarray
    alpha: np.ndarray
    m: np.ndarray
    w: np.ndarray
    r: np.ndarray
    y: np.ndarray


def encode_codes(seq, t=None):
    """Map a DNA string to int codes (A,C,G,T -> 0..3, N -> 4)."""
    if t is not None and len(seq) != t:
        raise InputError(f"sequence length {len(seq)} != model length {t}")
    try:
        return np.fromiter((_CODE[c] for c in seq.upper()), dtype=np.int64, count=len(seq))
    except KeyError:
        pos = next(i for i, c in enumerate(seq.upper()) if c not in _CODE)
        raise InputError(f"invalid character {seq[pos]!r} at position {pos}") from None


def one_hot(codes):
    """``(..., t)`` int codes -> ``(..., t, 4)`` float one-hot; N rows are zero."""
    eye = np.vstack([np.eye(4), np.zeros((1, 4))])
    return eye[np.asarray(codes)]


def embed_sequence(seq, table, t=None):
    """Column ``j`` of the ``p x t`` result is ``table[seq[j]]`` (zero for N)."""
    table = np.asarray(table, dtype=np.float64)
    if table.shape[0] != 4:
        raise DimensionError(f"embedding table must be 4 x p, got {table.shape}")
    return (one_hot(encode_codes(seq, t)) @ table).T


# --- parameters ---------------------------------------------------------------

def _lstm_shapes(prefix, n_in, h):
    return {
        f"{prefix}.Wx": (n_in, 4 * h),
        f"{prefix}.Wh": (h, 4 * h),
        f"{prefix}.b": (4 * h,),
    }


def _encoder_shapes(prefix, n_in, d):
    shapes = {}
    shapes.update(_lstm_shapes(f"{prefix}.fwd", n_in, d // 2))
    shapes.update(_lstm_shapes(f"{prefix}.bwd", n_in, d // 2))
    shapes[f"{prefix}.attn.W"] = (d, d)
    shapes[f"{prefix}.attn.v"] = (d,)
    return shapes


def param_shapes(hp):
    """Name -> shape for every trainable array of the MMN."""
    shapes = {"embed": (4, hp.p)}
    shapes.update(_encoder_shapes("f", hp.p, hp.d))
    shapes["memory"] = (hp.ell, hp.p, hp.t)
    shapes.update(_encoder_shapes("gp", hp.p, hp.d))
    shapes.update(_lstm_shapes("g.fwd", hp.d, hp.h))
    shapes.update(_lstm_shapes("g.bwd", hp.d, hp.h))
    shapes["Ws"] = (2, hp.d)
    shapes["Wr"] = (2, hp.d)
    return shapes


def baseline_shapes(hp):
    """Shapes of the memory-free attention-LSTM baseline."""
    shapes = {"embed": (4, hp.p)}
    shapes.update(_encoder_shapes("f", hp.p, hp.d))
    shapes["W"] = (2, hp.d)
    return shapes


def count_params(hp, baseline=False):
    shapes = baseline_shapes(hp) if baseline else param_shapes(hp)
    return int(sum(math.prod(s) for s in shapes.values()))


def _init_array(name, shape, rng):
    if name == "memory":
        return rng.normal(0.0, 0.1, size=shape)
    if name == "embed":
        # one-hot inputs: fan-in 1
        return rng.uniform(-1.0, 1.0, size=shape)
    if name.endswith(".b"):
        b = np.zeros(shape)
        h = shape[0] // 4
        b[h:2 * h] = 1.0  # forget gate
        return b
    fan_in = shape[0] if name.endswith((".Wx", ".Wh")) else shape[-1]
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class ModelParams:
    """Named float64 arrays plus the hyperparameters that shape them."""

    hp: HyperParams
    arrays: dict = field(default_factory=dict)
    kind: str = "mmn"

    @classmethod
    def init(cls, hp, seed=0, kind="mmn"):
        rng = np.random.default_rng(seed)
        shapes = baseline_shapes(hp) if kind == "lstm" else param_shapes(hp)
        return cls(hp, {n: _init_array(n, s, rng) for n, s in shapes.items()}, kind)

    @classmethod
    def zeros(cls, hp, kind="mmn"):
        shapes = baseline_shapes(hp) if kind == "lstm" else param_shapes(hp)
        return cls(hp, {n: np.zeros(s) for n, s in shapes.items()}, kind)

    def copy(self):
        return ModelParams(self.hp, {n: a.copy() for n, a in self.arrays.items()}, self.kind)

    def __getitem__(self, name):
        return self.arrays[name]

    def __setitem__(self, name, value):
        self.arrays[name] = np.asarray(value, dtype=np.float64)

    def n_params(self):
        return int(sum(a.size for a in self.arrays.values()))

    def leaves(self):
        """Fresh leaf tensors sharing storage with ``arrays``."""
        out = {}
        for name, arr in self.arrays.items():
            t = Tensor(arr, requires_grad=True)
            t.data = arr  # share storage so in-place optimizer updates are visible
            out[name] = t
        return out

    # checkpoint codec: repr() of float64 round-trips exactly through json

    def to_json(self):
        doc = {
            "kind": self.kind,
            "hyperparams": asdict(self.hp),
            "params": {n: a.tolist() for n, a in self.arrays.items()},
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        hp = HyperParams(**doc["hyperparams"])
        kind = doc.get("kind", "mmn")
        expected = baseline_shapes(hp) if kind == "lstm" else param_shapes(hp)
        arrays = {}
        for name, shape in expected.items():
            if name not in doc["params"]:
                raise InputError(f"checkpoint missing parameter {name!r}")
            arr = np.asarray(doc["params"][name], dtype=np.float64)
            if arr.shape != shape:
                raise InputError(f"checkpoint parameter {name!r} has shape {arr.shape}, expected {shape}")
            arrays[name] = arr
        return cls(hp, arrays, kind)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


# --- encoders -----------------------------------------------------------------

def _get(params, name):
    v = params[name]
    return v if isinstance(v, Tensor) else Tensor(v)


def lstm_pass(xproj, Wh, reverse=False):
    """One LSTM direction over ``(B, t, 4h)`` input projections -> ``(B, t, h)``."""
    if FUSED_LSTM:
        return ad.lstm_sequence(xproj, Wh, reverse)
    return lstm_pass_composed(xproj, Wh, reverse)


def lstm_pass_composed(xproj, Wh, reverse=False):
    """Step-by-step LSTM built from primitive graph ops.

    ``xproj`` is ``(B, t, 4h)`` holding ``x_j @ Wx + b``; gates are laid out
    as input, forget, output, candidate. Slow, but every step is checked by
    the primitive gradient rules; kept as the reference for the fused op.
    """
    B, t, four_h = xproj.shape
    h = four_h // 4
    steps = range(t - 1, -1, -1) if reverse else range(t)
    hidden = [None] * t
    h_prev = c_prev = None
    for j in steps:
        z = xproj[:, j, :]
        if h_prev is not None:
            z = z + h_prev @ Wh
        gates = ad.sigmoid(z[:, : 3 * h])
        i_g = gates[:, :h]
        f_g = gates[:, h : 2 * h]
        o_g = gates[:, 2 * h :]
        cand = ad.tanh(z[:, 3 * h :])
        c = i_g * cand if c_prev is None else f_g * c_prev + i_g * cand
        h_prev = o_g * ad.tanh(c)
        c_prev = c
        hidden[j] = h_prev
    return ad.stack(hidden, axis=1)


def bilstm(x, params, prefix):
    """Bidirectional LSTM over ``(B, t, n_in)``; returns ``(B, t, d)``, forward half first."""
    outs = []
    for direction, reverse in (("fwd", False), ("bwd", True)):
        Wx = _get(params, f"{prefix}.{direction}.Wx")
        if x.shape[-1] != Wx.shape[0]:
            raise DimensionError(f"{prefix}: input width {x.shape[-1]} != {Wx.shape[0]}")
        xproj = x @ Wx + _get(params, f"{prefix}.{direction}.b")
        outs.append(lstm_pass(xproj, _get(params, f"{prefix}.{direction}.Wh"), reverse))
    return ad.concat(outs, axis=-1)


def attention_pool(H, W_a, v_a):
    """Additive self-attention pooling over positions.

    ``H`` is ``(..., t, d)``. Scores ``e_j = v_a . tanh(W_a H_j)``; returns the
    ``alpha``-weighted sum of positions and ``alpha`` itself.
    """
    H, W_a, v_a = ad.as_tensor(H), ad.as_tensor(W_a), ad.as_tensor(v_a)
    scores = ad.tanh(H @ ad.transpose(W_a)) @ v_a
    alpha = ad.softmax(scores, axis=-1)
    context = ad.sum(H * ad.reshape(alpha, alpha.shape + (1,)), axis=-2)
    return context, alpha


def encode(x, params, prefix):
    H = bilstm(x, params, prefix)
    return attention_pool(H, _get(params, f"{prefix}.attn.W"), _get(params, f"{prefix}.attn.v"))


def embed_batch(codes, params):
    """``(B, t)`` int codes -> ``(B, t, p)`` embedded tensor."""
    return Tensor(one_hot(codes)) @ _get(params, "embed")


def encode_input(S, params):
    """s = f(S). ``S`` is ``(B, t, p)`` (or ``(t, p)``); returns ``(s, alpha)``."""
    S = ad.as_tensor(S)
    if S.ndim == 2:
        s, alpha = encode(ad.reshape(S, (1,) + S.shape), params, "f")
        return ad.reshape(s, s.shape[1:]), ad.reshape(alpha, alpha.shape[1:])
    return encode(S, params, "f")


def encode_memory_bank(params):
    """m_i = g(g'(M_i)): per-memory attention-LSTM then a BiLSTM across memories.

    Returns an ``(ell, d)`` tensor; row ``i`` is g's hidden state at position ``i``.
    """
    bank = _get(params, "memory")  # (ell, p, t)
    per_memory, _ = encode(ad.transpose(bank), params, "gp")  # (ell, d)
    ell, d = per_memory.shape
    return ad.reshape(bilstm(ad.reshape(per_memory, (1, ell, d)), params, "g"), (ell, d))


def match_weights(s, m):
    """Softmax over cosine similarities of ``s`` (``(..., d)``) to each row of ``m``."""
    s, m = ad.as_tensor(s), ad.as_tensor(m)
    sims = ad.cosine_similarity(ad.reshape(s, s.shape[:-1] + (1, s.shape[-1])), m)
    return ad.softmax(sims, axis=-1)


def read_memory(w, m):
    w, m = ad.as_tensor(w), ad.as_tensor(m)
    if w.shape[-1] != m.shape[0]:
        raise DimensionError(f"read_memory: {w.shape[-1]} weights for {m.shape[0]} memories")
    return w @ m


def classify(s, r, Ws, Wr):
    s, r, Ws, Wr = (ad.as_tensor(v) for v in (s, r, Ws, Wr))
    if Ws.shape[-1] != s.shape[-1] or Wr.shape[-1] != r.shape[-1]:
        raise DimensionError(
            f"classify shape mismatch: s {s.shape}, r {r.shape}, Ws {Ws.shape}, Wr {Wr.shape}"
        )
    logits = s @ ad.transpose(Ws) + r @ ad.transpose(Wr)
    return ad.softmax(logits, axis=-1)


def forward_batch(codes, params):
    """Full MMN forward on ``(B, t)`` codes. Returns dict of graph tensors."""
    S = embed_batch(codes, params)
    s, alpha = encode_input(S, params)
    m = encode_memory_bank(params)
    w = match_weights(s, m)
    r = read_memory(w, m)
    y = classify(s, r, _get(params, "Ws"), _get(params, "Wr"))
    return {"s": s, "alpha": alpha, "m": m, "w": w, "r": r, "y": y}


def baseline_forward_batch(codes, params):
    """Memory-free attention-LSTM: softmax(W s)."""
    s, alpha = encode_input(embed_batch(codes, params), params)
    y = ad.softmax(s @ ad.transpose(_get(params, "W")), axis=-1)
    return {"s": s, "alpha": alpha, "y": y}


def forward(seq, params):
    """Single-sequence forward pass returning a :class:`ForwardTrace`."""
    codes = encode_codes(seq, params.hp.t)[None, :]
    with ad.no_grad():
        out = forward_batch(codes, params.arrays)
    return ForwardTrace(
        s=out["s"].data[0],
        alpha=out["alpha"].data[0],
        m=out["m"].data,
        w=out["w"].data[0],
        r=out["r"].data[0],
        y=out["y"].data[0],
    )


def lstm_baseline_forward(seq, params):
    codes = encode_codes(seq, params.hp.t)[None, :]
    with ad.no_grad():
        return baseline_forward_batch(codes, params.arrays)["y"].data[0]


def predict_proba(params, codes, batch_size=256):
    """Positive-class probabilities for an ``(n, t)`` code matrix."""
    fwd = baseline_forward_batch if params.kind == "lstm" else forward_batch
    out = np.empty(len(codes))
    with ad.no_grad():
        for start in range(0, len(codes), batch_size):
            chunk = codes[start : start + batch_size]
            out[start : start + len(chunk)] = fwd(chunk, params.arrays)["y"].data[:, 1]
    return out
