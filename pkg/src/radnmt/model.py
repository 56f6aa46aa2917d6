"""Attentional encoder-decoder over characters with radical input features.

Architecture:

* Source embedding: per position, the character embedding (p1 dims) is
  concatenated with a separately trained radical embedding (p2 dims);
  the concatenated length p1+p2 is the total embedding size. With p2=0
  the model degenerates exactly to a plain character embedding.
* Encoder: single-layer bidirectional LSTM; the annotation vector at
  position j is the concatenation of forward and backward states (2q).
* Decoder: single-layer LSTM with input feeding: its input is the
  previous target character's embedding concatenated with the previous
  attentional output h~.
* Attention: Luong-style "general" score s^T W h over annotations,
  masked softmax, weighted-sum context; h~ = tanh(W_c [s; c]).
* Output: linear projection of h~ to target vocabulary logits.

Training-mode dropout is applied to the embedded encoder/decoder inputs
and to h~ (the dropped h~ is both projected and fed forward).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import FEATURE_VOCAB_SIZE, Batch
from .errors import ConfigError, ContractError, DataError, ShapeError
from .seeding import derive_rng

CHECKPOINT_MAGIC = b"RNMT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    char_embed_dim: int = 448  # p1
    feat_embed_dim: int = 64  # p2; 0 disables the radical path
    hidden_size: int = 512  # q
    feat_vocab_size: int = FEATURE_VOCAB_SIZE
    layers: int = 1
    attention: str = "general"
    dropout: float = 0.8

    def __post_init__(self):
        if self.char_embed_dim < 1:
            raise ConfigError("char_embed_dim must be >= 1")
        if self.feat_embed_dim < 0:
            raise ConfigError("feat_embed_dim must be >= 0")
        if self.hidden_size < 1:
            raise ConfigError("hidden_size must be >= 1")
        if self.layers != 1:
            raise ConfigError("only single-layer encoder/decoder is supported")
        if self.src_vocab_size < 5 or self.tgt_vocab_size < 5:
            raise ConfigError("vocabularies must contain at least one character")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.attention == "dot":
            # dot scores need the annotation dim (2q) to equal the decoder
            # state dim (q), which a concatenating bi-encoder never gives.
            raise ConfigError(
                "attention='dot' requires matching encoder/decoder dims; "
                "the bidirectional encoder produces 2q-dim annotations, use 'general'"
            )
        if self.attention != "general":
            raise ConfigError(f"unknown attention kind {self.attention!r}")

    @property
    def total_embed_dim(self) -> int:
        return self.char_embed_dim + self.feat_embed_dim


def _param_shapes(config: ModelConfig, feature_path: bool) -> dict[str, tuple[int, ...]]:
    p1, p2, q = config.char_embed_dim, config.feat_embed_dim, config.hidden_size
    p = p1 + p2 if feature_path else p1
    shapes: dict[str, tuple[int, ...]] = {"src_char_emb": (config.src_vocab_size, p1)}
    if feature_path:
        shapes["src_feat_emb"] = (config.feat_vocab_size, p2)
    shapes.update(
        {
            "tgt_char_emb": (config.tgt_vocab_size, p1),
            "enc_fwd_Wx": (p, 4 * q),
            "enc_fwd_Wh": (q, 4 * q),
            "enc_fwd_b": (4 * q,),
            "enc_bwd_Wx": (p, 4 * q),
            "enc_bwd_Wh": (q, 4 * q),
            "enc_bwd_b": (4 * q,),
            "dec_Wx": (p1 + q, 4 * q),
            "dec_Wh": (q, 4 * q),
            "dec_b": (4 * q,),
            "dec_init_h_W": (q, q),
            "dec_init_h_b": (q,),
            "dec_init_c_W": (q, q),
            "dec_init_c_b": (q,),
            "attn_W": (q, 2 * q),
            "attn_out_W": (3 * q, q),
            "out_W": (q, config.tgt_vocab_size),
            "out_b": (config.tgt_vocab_size,),
        }
    )
    return shapes


class ModelParams:
    """All trainable tensors, enumerable and serializable by name."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor], feature_path: bool):
        expected = _param_shapes(config, feature_path)
        if set(tensors) != set(expected):
            raise ConfigError(
                f"parameter set mismatch: extra {set(tensors) - set(expected)}, "
                f"missing {set(expected) - set(tensors)}"
            )
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {tensors[name].shape}")
        self.config = config
        self.feature_path = feature_path
        self._tensors = {name: tensors[name] for name in expected}  # fixed order

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        seed: int,
        feature_path: bool = True,
        init_low: float = -0.1,
        init_high: float = 0.1,
    ) -> "ModelParams":
        """Uniform init in [init_low, init_high); forget-gate biases start at 1.

        Each tensor draws from its own named stream, so models sharing a
        parameter name get bit-identical values for it regardless of
        which other parameters exist.
        """
        if feature_path is False and config.feat_embed_dim != 0:
            raise ConfigError("the no-feature baseline requires feat_embed_dim == 0")
        q = config.hidden_size
        tensors = {}
        for name, shape in _param_shapes(config, feature_path).items():
            rng = derive_rng(seed, "init", name)
            t = ad.uniform_init(shape, init_low, init_high, rng)
            t.name = name
            tensors[name] = t
        for name in ("enc_fwd_b", "enc_bwd_b", "dec_b"):
            tensors[name].data[q : 2 * q] = 1.0
        return cls(config, tensors, feature_path)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def named(self):
        return self._tensors.items()

    def all(self) -> list[Tensor]:
        return list(self._tensors.values())

    def zero_grads(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def grads(self) -> list[np.ndarray]:
        """Gradient arrays in parameter order; untouched params count as zero."""
        out = []
        for t in self._tensors.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            out.append(t.grad)
        return out


@dataclass
class Annotations:
    """Encoder output: per-position vectors (B, L, 2q) plus carry-over."""

    vectors: Tensor
    mask: np.ndarray  # (B, L) bool
    final_bwd_h: Tensor  # (B, q), backward state after reading position 0
    final_bwd_c: Tensor


def embed_with_features(char_ids: np.ndarray, feat_ids: np.ndarray | None, char_emb: Tensor, feat_emb: Tensor | None) -> Tensor:
    """Per-position concat of character and feature embeddings.

    With feat_emb None (the no-feature baseline) this is a plain
    embedding lookup; with a zero-width feat_emb the concatenation is a
    bitwise no-op, so both routes coincide exactly.
    """
    chars = ad.embedding_lookup(char_emb, char_ids)
    if feat_emb is None:
        return chars
    if feat_ids is None:
        raise DataError("feature ids required when the feature path is enabled")
    feats = ad.embedding_lookup(feat_emb, feat_ids)
    return ad.concat([chars, feats], axis=1)


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, Wx: Tensor, Wh: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """Standard LSTM step. Gate layout along the 4q axis: [i | f | o | g]."""
    q = h_prev.shape[1]
    gates = ad.add(ad.add(ad.matmul(x, Wx), ad.matmul(h_prev, Wh)), b)
    i = ad.sigmoid(ad.slice_axis(gates, 1, 0, q))
    f = ad.sigmoid(ad.slice_axis(gates, 1, q, q))
    o = ad.sigmoid(ad.slice_axis(gates, 1, 2 * q, q))
    g = ad.tanh(ad.slice_axis(gates, 1, 3 * q, q))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h = ad.mul(o, ad.tanh(c))
    return h, c


def _mask_carry(new: Tensor, prev: Tensor, keep_col: Tensor, drop_col: Tensor) -> Tensor:
    # h <- m * h_new + (1-m) * h_prev, so PAD steps carry state through
    return ad.add(ad.mul(new, keep_col), ad.mul(prev, drop_col))


def _zeros(batch: int, dim: int) -> Tensor:
    return Tensor(np.zeros((batch, dim)))


def _maybe_dropout(x: Tensor, drop_p: float, rng) -> Tensor:
    if drop_p <= 0.0:
        return x
    mask, scale = ad.make_dropout_mask(x.shape, drop_p, rng)
    return ad.dropout_apply(x, mask, scale)


def encode(
    src: np.ndarray,
    feats: np.ndarray | None,
    src_mask: np.ndarray,
    params: ModelParams,
    train: bool = False,
    dropout: float | None = None,
    rng=None,
) -> Annotations:
    """Bidirectional encoding; masked positions carry state unchanged."""
    if src.ndim != 2 or src.shape[1] == 0:
        raise DataError(f"encode needs a (B, L>=1) id grid, got {src.shape}")
    batch, length = src.shape
    q = params.config.hidden_size
    drop_p = (params.config.dropout if dropout is None else dropout) if train else 0.0
    char_emb = params["src_char_emb"]
    feat_emb = params["src_feat_emb"] if params.feature_path else None

    embedded = []
    for j in range(length):
        x = embed_with_features(src[:, j], None if feats is None else feats[:, j], char_emb, feat_emb)
        embedded.append(_maybe_dropout(x, drop_p, rng))

    maskf = src_mask.astype(np.float64)
    keep = [Tensor(maskf[:, j : j + 1]) for j in range(length)]
    drop = [Tensor(1.0 - maskf[:, j : j + 1]) for j in range(length)]

    def run(direction: str, order):
        Wx, Wh, b = params[f"enc_{direction}_Wx"], params[f"enc_{direction}_Wh"], params[f"enc_{direction}_b"]
        h, c = _zeros(batch, q), _zeros(batch, q)
        states: list[Tensor | None] = [None] * length
        for j in order:
            h_new, c_new = lstm_cell(embedded[j], h, c, Wx, Wh, b)
            h = _mask_carry(h_new, h, keep[j], drop[j])
            c = _mask_carry(c_new, c, keep[j], drop[j])
            states[j] = h
        return states, h, c

    fwd, _, _ = run("fwd", range(length))
    bwd, bwd_h, bwd_c = run("bwd", range(length - 1, -1, -1))
    vectors = ad.stack_steps([ad.concat([fwd[j], bwd[j]], axis=1) for j in range(length)])
    return Annotations(vectors, src_mask, bwd_h, bwd_c)


def init_decoder_state(ann: Annotations, params: ModelParams) -> tuple[Tensor, Tensor]:
    """Decoder start state: affine+tanh of the final backward encoder state."""
    h = ad.tanh(ad.add(ad.matmul(ann.final_bwd_h, params["dec_init_h_W"]), params["dec_init_h_b"]))
    c = ad.tanh(ad.add(ad.matmul(ann.final_bwd_c, params["dec_init_c_W"]), params["dec_init_c_b"]))
    return h, c


def attention(state_h: Tensor, ann: Annotations, params: ModelParams) -> tuple[Tensor, Tensor]:
    """Context vector and alignment weights for one decoder step.

    score_j = s^T W h_j; masked positions are excluded from the softmax,
    so the weights form a distribution over real source positions.
    """
    if not ann.mask.any(axis=1).all():
        raise ContractError("attention: a batch row has no unmasked source position")
    proj = ad.matmul(state_h, params["attn_W"])  # (B, 2q)
    scores = ad.bmm_scores(proj, ann.vectors)  # (B, L)
    weights = ad.softmax(scores, mask=ann.mask)
    context = ad.bmm_context(weights, ann.vectors)  # (B, 2q)
    return context, weights


def decode_step(
    y_prev: np.ndarray,
    h_tilde_prev: Tensor,
    state: tuple[Tensor, Tensor],
    ann: Annotations,
    params: ModelParams,
    train: bool = False,
    dropout: float | None = None,
    rng=None,
) -> tuple[Tensor, tuple[Tensor, Tensor], Tensor]:
    """One decoder step with input feeding; returns (logits, state, h~)."""
    drop_p = (params.config.dropout if dropout is None else dropout) if train else 0.0
    emb = ad.embedding_lookup(params["tgt_char_emb"], y_prev)
    emb = _maybe_dropout(emb, drop_p, rng)
    x = ad.concat([emb, h_tilde_prev], axis=1)  # input feeding
    h, c = lstm_cell(x, state[0], state[1], params["dec_Wx"], params["dec_Wh"], params["dec_b"])
    context, _ = attention(h, ann, params)
    h_tilde = ad.tanh(ad.matmul(ad.concat([h, context], axis=1), params["attn_out_W"]))
    h_tilde = _maybe_dropout(h_tilde, drop_p, rng)
    logits = ad.add(ad.matmul(h_tilde, params["out_W"]), params["out_b"])
    return logits, (h, c), h_tilde


def forward_loss(
    batch: Batch,
    params: ModelParams,
    train: bool = False,
    dropout: float | None = None,
    rng=None,
) -> tuple[Tensor, int]:
    """Teacher-forced NLL summed over real target positions.

    BOS is never predicted; EOS is. Returns (total NLL, token count).
    """
    ann = encode(batch.src, batch.feats, batch.src_mask, params, train, dropout, rng)
    state = init_decoder_state(ann, params)
    h_tilde = _zeros(batch.size, params.config.hidden_size)
    total: Tensor | None = None
    steps = batch.tgt.shape[1] - 1
    for t in range(steps):
        logits, state, h_tilde = decode_step(
            batch.tgt[:, t], h_tilde, state, ann, params, train, dropout, rng
        )
        nll = ad.masked_nll(logits, batch.tgt[:, t + 1], batch.tgt_mask[:, t + 1])
        total = nll if total is None else ad.add(total, nll)
    count = int(batch.tgt_mask[:, 1:].sum())
    return total, count


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: ModelParams, path) -> None:
    """Bit-exact binary checkpoint: magic, version, JSON manifest, f64 payload."""
    tensors = list(params.named())
    directory = []
    offset = 0
    for name, t in tensors:
        directory.append({"name": name, "shape": list(t.shape), "offset": offset})
        offset += t.data.size * 8
    manifest = json.dumps(
        {
            "config": asdict(params.config),
            "feature_path": params.feature_path,
            "tensors": directory,
        },
        ensure_ascii=False,
    ).encode("utf-8")
    with Path(path).open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for _, t in tensors:
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with Path(path).open("rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        (manifest_len,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(manifest_len).decode("utf-8"))
        config = ModelConfig(**manifest["config"])
        payload = f.read()
    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=size, offset=start)
        t = Tensor(arr.reshape(shape).copy(), requires_grad=True)
        t.name = entry["name"]
        tensors[entry["name"]] = t
    return ModelParams(config, tensors, manifest["feature_path"])
