"""The token-classification network and its training loop.

Per token: contextual embedding -> dropout -> POS one-hot concat -> two
graph-convolution (SAGE) layers over the dependency token graph -> BiLSTM
over the original token order -> concat with the pre-GNN features ->
linear head over the five BIO tags. Ablation switches reduce this to the
plain linear baseline and the intermediate variants.

Contextual embeddings are inputs here (read from file or hashed), not a
fine-tuned encoder; an optional trainable square projection can stand in
for the lost adaptivity.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import ndcore
from .blas import single_thread_blas
from .corpus import LABELS, LABEL_INDEX, LabeledExample, PosVocab
from .errors import CespanError
from .ioutil import write_atomic_bytes
from .ndcore import Tensor
from .rng import stable_string_hash, substream


class ModelError(CespanError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_bert: int = 768
    d_pos: int = 51
    gnn_hidden: int = 1024
    d_gnn: int = 512
    bilstm_out: int = 512
    n_classes: int = 5
    dropout: float = 0.1
    max_seq_len: int = 350
    batch_size: int = 4
    epochs: int = 10
    base_lr: float = 2e-5
    use_pos: bool = True
    use_gnn: bool = True
    use_bilstm: bool = True
    node_features: str = "full"  # or "constant_one"
    symmetrize_edges: bool = False
    dropout_all_layers: bool = False
    train_projection: bool = False

    def __post_init__(self):
        if self.n_classes != len(LABELS):
            raise ModelError(f"n_classes must be {len(LABELS)}")
        if self.bilstm_out % 2 != 0:
            raise ModelError("bilstm_out must be even (split across directions)")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout {self.dropout} outside [0, 1)")
        if self.node_features not in ("full", "constant_one"):
            raise ModelError(f"unknown node_features {self.node_features!r}")
        for name in ("d_bert", "d_pos", "gnn_hidden", "d_gnn", "bilstm_out",
                     "max_seq_len", "batch_size"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.epochs < 0:
            raise ModelError("epochs must be >= 0")

    @property
    def d_gnn_effective(self) -> int:
        return self.bilstm_out if self.use_bilstm else self.d_gnn

    @property
    def d_feats(self) -> int:
        """Width of the pre-GNN feature concat (embedding + POS)."""
        return self.d_bert + (self.d_pos if self.use_pos else 0)

    @property
    def gnn_in_dim(self) -> int:
        return self.d_feats if self.node_features == "full" else 1

    @property
    def head_in_dim(self) -> int:
        return self.d_feats + (self.d_gnn_effective if self.use_gnn else 0)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ModelError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# Table-style ablation grid: the six model variants evaluated against each
# other. "baseline" is the plain classifier + Viterbi; "proposed" the full
# graph + BiLSTM model.
VARIANTS: dict[str, dict] = {
    "baseline": dict(use_pos=False, use_gnn=False, use_bilstm=False),
    "gnn-no-pos": dict(
        use_pos=False, use_gnn=True, use_bilstm=True, node_features="full"
    ),
    "baseline-pos": dict(use_pos=True, use_gnn=False, use_bilstm=False),
    "gnn-no-bilstm": dict(
        use_pos=True, use_gnn=True, use_bilstm=False, node_features="full"
    ),
    "gnn-constant-nodes": dict(
        use_pos=True, use_gnn=True, use_bilstm=True, node_features="constant_one"
    ),
    "proposed": dict(
        use_pos=True, use_gnn=True, use_bilstm=True, node_features="full"
    ),
}


def apply_variant(config: ModelConfig, variant: str) -> ModelConfig:
    if variant not in VARIANTS:
        raise ModelError(
            f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}"
        )
    return replace(config, **VARIANTS[variant])


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

EMBED_MAGIC = b"CEEM"
EMBED_VERSION = 1


class EmbeddingError(CespanError):
    pass


class HashedEmbeddings:
    """Deterministic pseudo-random token vectors.

    Stands in for a contextual encoder in tests and demos: the same piece
    string maps to the same vector on every platform. Not a claim about
    accuracy.
    """

    mode = "hashed"

    def __init__(self, dim: int):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, piece: str) -> np.ndarray:
        vec = self._cache.get(piece)
        if vec is None:
            gen = np.random.Generator(np.random.PCG64(stable_string_hash(piece)))
            vec = (gen.random(self.dim) - 0.5).astype(np.float32)
            self._cache[piece] = vec
        return vec

    def matrix(self, ex: LabeledExample) -> np.ndarray:
        if not ex.tokens:
            raise EmbeddingError(f"example {ex.id} has no tokens")
        return np.stack([self._vector(p) for p in ex.tokens])


class FileEmbeddings:
    """Loader for the binary embedding file (magic CEEM).

    Layout, all little-endian: magic, u32 version, u32 dim, u32 example
    count; per example: u32 id length + id, u32 token count, per token
    u32 piece length + piece, then an (n, dim) float32 row-major matrix.
    Pieces are stored so alignment drift fails loudly at load time.
    """

    mode = "from_file"

    def __init__(self, dim: int, entries: dict[str, tuple[tuple[str, ...], np.ndarray]]):
        self.dim = dim
        self._entries = entries

    @classmethod
    def load(cls, path) -> "FileEmbeddings":
        with open(path, "rb") as fh:
            data = fh.read()
        buf = io.BytesIO(data)

        def read_u32():
            raw = buf.read(4)
            if len(raw) != 4:
                raise EmbeddingError(f"{path}: truncated file")
            return struct.unpack("<I", raw)[0]

        def read_str():
            length = read_u32()
            raw = buf.read(length)
            if len(raw) != length:
                raise EmbeddingError(f"{path}: truncated string")
            return raw.decode("utf-8")

        magic = buf.read(4)
        if magic != EMBED_MAGIC:
            raise EmbeddingError(f"{path}: bad magic {magic!r}, expected {EMBED_MAGIC!r}")
        version = read_u32()
        if version != EMBED_VERSION:
            raise EmbeddingError(f"{path}: unsupported version {version}")
        dim = read_u32()
        count = read_u32()
        entries: dict[str, tuple[tuple[str, ...], np.ndarray]] = {}
        for _ in range(count):
            ex_id = read_str()
            n_tokens = read_u32()
            pieces = tuple(read_str() for _ in range(n_tokens))
            nbytes = n_tokens * dim * 4
            raw = buf.read(nbytes)
            if len(raw) != nbytes:
                raise EmbeddingError(f"{path}: truncated matrix for id {ex_id!r}")
            matrix = np.frombuffer(raw, dtype="<f4").reshape(n_tokens, dim).copy()
            if ex_id in entries:
                raise EmbeddingError(f"{path}: duplicate id {ex_id!r}")
            entries[ex_id] = (pieces, matrix)
        if buf.read(1):
            raise EmbeddingError(f"{path}: trailing bytes after last example")
        return cls(dim, entries)

    def ids(self):
        return self._entries.keys()

    def pieces(self, ex_id: str) -> tuple[str, ...]:
        if ex_id not in self._entries:
            raise EmbeddingError(f"no embeddings for example {ex_id!r}")
        return self._entries[ex_id][0]

    def matrix(self, ex: LabeledExample) -> np.ndarray:
        if ex.id not in self._entries:
            raise EmbeddingError(f"no embeddings for example {ex.id!r}")
        pieces, matrix = self._entries[ex.id]
        n = len(ex.tokens)
        if len(pieces) < n:
            raise EmbeddingError(
                f"example {ex.id}: file has {len(pieces)} tokens, need {n}"
            )
        for t in range(n):
            if pieces[t] != ex.tokens[t]:
                raise EmbeddingError(
                    f"example {ex.id}: token {t} is {ex.tokens[t]!r} but the "
                    f"embedding file recorded {pieces[t]!r}"
                )
        return matrix[:n]


def write_embeddings(path, dim: int, items) -> None:
    """Write the CEEM binary format; items yields (id, pieces, matrix)."""
    buf = io.BytesIO()
    body = io.BytesIO()
    count = 0
    for ex_id, pieces, matrix in items:
        matrix = np.ascontiguousarray(matrix, dtype="<f4")
        if matrix.shape != (len(pieces), dim):
            raise EmbeddingError(
                f"example {ex_id}: matrix shape {matrix.shape} != "
                f"({len(pieces)}, {dim})"
            )
        raw_id = ex_id.encode("utf-8")
        body.write(struct.pack("<I", len(raw_id)))
        body.write(raw_id)
        body.write(struct.pack("<I", len(pieces)))
        for piece in pieces:
            raw = piece.encode("utf-8")
            body.write(struct.pack("<I", len(raw)))
            body.write(raw)
        body.write(matrix.tobytes())
        count += 1
    buf.write(EMBED_MAGIC)
    buf.write(struct.pack("<I", EMBED_VERSION))
    buf.write(struct.pack("<I", dim))
    buf.write(struct.pack("<I", count))
    buf.write(body.getvalue())
    write_atomic_bytes(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Prepared examples
# ---------------------------------------------------------------------------

@dataclass
class PreparedExample:
    """Everything the forward pass needs for one document, precomputed."""

    ex: LabeledExample
    emb: np.ndarray  # (n_tokens, d_bert) float32
    pos_indices: np.ndarray | None  # per token, -1 for unknown tags
    src: np.ndarray  # int64 edge sources (token indices)
    dst: np.ndarray
    indeg: np.ndarray  # int64 per-token in-degree
    targets: np.ndarray  # int64 label index per token
    word_first_token: np.ndarray  # int64, first surviving token per word (prefix)

    @property
    def n_tokens(self) -> int:
        return len(self.ex.tokens)


def pos_onehot(index: int | None, d_pos: int) -> np.ndarray:
    """Unit vector for a known tag index, all-zero for unknown (None/-1)."""
    vec = np.zeros(d_pos, dtype=np.float32)
    if index is not None and index >= 0:
        if index >= d_pos:
            raise ModelError(f"POS index {index} exceeds d_pos={d_pos}")
        vec[index] = 1.0
    return vec


def pos_matrix(pos_indices, d_pos: int, dtype) -> np.ndarray:
    out = np.zeros((len(pos_indices), d_pos), dtype=dtype)
    for row, idx in enumerate(pos_indices):
        if idx is not None and idx >= 0:
            if idx >= d_pos:
                raise ModelError(f"POS index {idx} exceeds d_pos={d_pos}")
            out[row, idx] = 1.0
    return out


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def param_spec(config: ModelConfig) -> list[tuple[str, tuple, int | None]]:
    """(name, shape, fan_in) for every parameter the variant trains.

    fan_in None means zeros (biases); "identity" projections are handled
    separately in init_params.
    """
    spec: list[tuple[str, tuple, int | None]] = []
    if config.train_projection:
        spec.append(("proj.w", (config.d_bert, config.d_bert), None))
    if config.use_gnn:
        g_in, hid, g_out = config.gnn_in_dim, config.gnn_hidden, config.d_gnn
        spec += [
            ("sage1.w_self", (g_in, hid), g_in),
            ("sage1.w_neigh", (g_in, hid), g_in),
            ("sage1.b", (hid,), None),
            ("sage2.w_self", (hid, g_out), hid),
            ("sage2.w_neigh", (hid, g_out), hid),
            ("sage2.b", (g_out,), None),
        ]
        if config.use_bilstm:
            h = config.bilstm_out // 2
            for direction in ("lstm_f", "lstm_b"):
                spec += [
                    (f"{direction}.w_x", (g_out, 4 * h), g_out),
                    (f"{direction}.w_h", (h, 4 * h), h),
                    (f"{direction}.b", (4 * h,), None),
                ]
    spec += [
        ("head.w", (config.head_in_dim, config.n_classes), config.head_in_dim),
        ("head.b", (config.n_classes,), None),
    ]
    return spec


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Seeded initialization: uniform(+-sqrt(1/fan_in)) weights, zero biases.

    Each parameter draws from its own named substream, so variants sharing
    a seed share values wherever shapes agree.
    """
    params: dict[str, Tensor] = {}
    for name, shape, fan_in in param_spec(config):
        if name == "proj.w":
            data = np.eye(config.d_bert, dtype=dtype)
        elif fan_in is None:
            data = np.zeros(shape, dtype=dtype)
        else:
            data = _uniform(substream(seed, f"init/{name}"), shape, fan_in, dtype)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def _sage(x, prepared: PreparedExample, params, prefix: str):
    agg = ndcore.neighbor_mean(x, prepared.src, prepared.dst, prepared.indeg)
    own = ndcore.matmul(x, params[f"{prefix}.w_self"])
    nbr = ndcore.matmul(agg, params[f"{prefix}.w_neigh"])
    return ndcore.add(ndcore.add(own, nbr), params[f"{prefix}.b"])


def _bilstm(x, params):
    xp_f = ndcore.add(ndcore.matmul(x, params["lstm_f.w_x"]), params["lstm_f.b"])
    h_f = ndcore.lstm_direction(xp_f, params["lstm_f.w_h"])
    x_rev = ndcore.flip_rows(x)
    xp_b = ndcore.add(ndcore.matmul(x_rev, params["lstm_b.w_x"]), params["lstm_b.b"])
    h_b = ndcore.flip_rows(ndcore.lstm_direction(xp_b, params["lstm_b.w_h"]))
    return ndcore.concat_features([h_f, h_b])


def forward(
    prepared: PreparedExample,
    params: dict[str, Tensor],
    config: ModelConfig,
    mode: str = "eval",
    dropout_rng: np.random.Generator | None = None,
    trace: dict | None = None,
) -> Tensor:
    """Token logits (n, 5) for one example."""
    dtype = params["head.w"].dtype
    n = prepared.n_tokens
    if prepared.emb.shape != (n, config.d_bert):
        raise ModelError(
            f"example {prepared.ex.id}: embedding shape {prepared.emb.shape} "
            f"!= ({n}, {config.d_bert})"
        )
    if mode == "train" and config.dropout > 0.0 and dropout_rng is None:
        raise ModelError("train-mode forward needs a dropout rng")

    def drop(t):
        return ndcore.dropout(t, config.dropout, mode, dropout_rng)

    r = Tensor(prepared.emb.astype(dtype, copy=False))
    if config.train_projection:
        r = ndcore.matmul(r, params["proj.w"])
    r_tilde = drop(r)

    if config.use_pos:
        if prepared.pos_indices is None:
            raise ModelError(f"example {prepared.ex.id}: POS features missing")
        pos = Tensor(pos_matrix(prepared.pos_indices, config.d_pos, dtype))
        r2 = ndcore.concat_features([r_tilde, pos])
    else:
        r2 = r_tilde

    if config.use_gnn:
        if config.node_features == "constant_one":
            gnn_in = Tensor(np.ones((n, 1), dtype=dtype))
        else:
            gnn_in = r2
        h1 = ndcore.relu(_sage(gnn_in, prepared, params, "sage1"))
        if config.dropout_all_layers:
            h1 = drop(h1)
        g = _sage(h1, prepared, params, "sage2")
        if config.dropout_all_layers:
            g = drop(g)
        if config.use_bilstm:
            g = _bilstm(g, params)
            if config.dropout_all_layers:
                g = drop(g)
        r4 = ndcore.concat_features([r2, g])
    else:
        h1 = g = None
        r4 = r2

    logits = ndcore.add(ndcore.matmul(r4, params["head.w"]), params["head.b"])

    if trace is not None:
        trace.update(
            r=r.shape, r2=r2.shape, r4=r4.shape, logits=logits.shape,
            sage1=None if h1 is None else h1.shape,
            gnn_out=None if g is None else g.shape,
        )
    return logits


def example_loss(
    prepared: PreparedExample,
    params: dict[str, Tensor],
    config: ModelConfig,
    mode: str,
    dropout_rng=None,
) -> Tensor:
    logits = forward(prepared, params, config, mode, dropout_rng)
    return ndcore.cross_entropy(logits, prepared.targets)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train(
    dataset: list[PreparedExample],
    config: ModelConfig,
    seed: int,
    params: dict[str, Tensor] | None = None,
    log=None,
) -> tuple[dict[str, Tensor], list[float]]:
    """Seeded training run; returns (params, per-epoch mean loss trace).

    Examples are reshuffled each epoch; gradients accumulate over
    batch_size examples before each Adam step at the linearly decayed
    learning rate. Bit-reproducible for a fixed seed and backend.
    """
    if not dataset:
        raise ModelError("empty training dataset")
    with single_thread_blas():
        return _train_loop(dataset, config, seed, params, log)


def _train_loop(dataset, config, seed, params, log):
    if params is None:
        params = init_params(config, seed)
    state = ndcore.AdamState.for_params(params)
    steps_per_epoch = -(-len(dataset) // config.batch_size)
    schedule = ndcore.LrSchedule(config.base_lr, config.epochs * steps_per_epoch)
    shuffle_rng = substream(seed, "shuffle")
    dropout_rng = substream(seed, "dropout")

    trace: list[float] = []
    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            ndcore.zero_grads(params)
            batch_loss = 0.0
            for i in batch:
                loss = example_loss(
                    dataset[int(i)], params, config, "train", dropout_rng
                )
                value = loss.item()
                if not np.isfinite(value):
                    raise ModelError(
                        f"non-finite loss {value} at epoch {epoch} step {step} "
                        f"example {dataset[int(i)].ex.id}"
                    )
                ndcore.backward(loss, seed=1.0 / len(batch))
                batch_loss += value / len(batch)
            ndcore.adam_step(params, state, schedule.lr(step))
            step += 1
            epoch_loss += batch_loss
        trace.append(epoch_loss / steps_per_epoch)
        if log is not None:
            log(epoch, trace[-1])
    return params, trace


def predict_logits(
    prepared: PreparedExample, params: dict[str, Tensor], config: ModelConfig
) -> np.ndarray:
    return forward(prepared, params, config, mode="eval").data


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"CEMD"
CKPT_VERSION = 1


class CheckpointError(CespanError):
    pass


def save_checkpoint(
    params: dict[str, Tensor],
    config: ModelConfig,
    path,
    pos_vocab: PosVocab | None = None,
) -> None:
    header = {
        "config": config.to_dict(),
        "head_in_dim": config.head_in_dim,
        "labels": list(LABELS),
        "pos_vocab": pos_vocab.to_dict() if pos_vocab is not None else None,
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<I", CKPT_VERSION))
    buf.write(struct.pack("<I", len(raw_header)))
    buf.write(raw_header)
    buf.write(struct.pack("<I", len(params)))
    for name, p in params.items():
        raw_name = name.encode("utf-8")
        data = np.ascontiguousarray(p.data, dtype="<f4")
        buf.write(struct.pack("<I", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<I", data.ndim))
        for dim in data.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(data.tobytes())
    write_atomic_bytes(path, buf.getvalue())


def load_checkpoint(path, expect_config: ModelConfig | None = None):
    """Read a checkpoint; returns (params, config, pos_vocab).

    ``expect_config``, when given, must equal the stored config exactly.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)

    def read_u32():
        raw = buf.read(4)
        if len(raw) != 4:
            raise CheckpointError(f"{path}: truncated checkpoint")
        return struct.unpack("<I", raw)[0]

    magic = buf.read(4)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {CKPT_MAGIC!r}")
    version = read_u32()
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header_len = read_u32()
    raw_header = buf.read(header_len)
    if len(raw_header) != header_len:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw_header.decode("utf-8"))
    config = ModelConfig.from_dict(header["config"])
    if header.get("labels") != list(LABELS):
        raise CheckpointError(f"{path}: label order mismatch")
    pos_vocab = (
        PosVocab.from_dict(header["pos_vocab"])
        if header.get("pos_vocab") is not None
        else None
    )
    if expect_config is not None and expect_config.to_dict() != config.to_dict():
        diffs = [
            key
            for key in config.to_dict()
            if config.to_dict()[key] != expect_config.to_dict()[key]
        ]
        raise CheckpointError(f"{path}: config mismatch on keys {diffs}")

    n_tensors = read_u32()
    params: dict[str, Tensor] = {}
    for _ in range(n_tensors):
        name_len = read_u32()
        name = buf.read(name_len).decode("utf-8")
        ndim = read_u32()
        shape = tuple(read_u32() for _ in range(ndim))
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        raw = buf.read(nbytes)
        if len(raw) != nbytes:
            raise CheckpointError(f"{path}: truncated tensor {name!r}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        params[name] = Tensor(arr, requires_grad=True, name=name)
    if buf.read(1):
        raise CheckpointError(f"{path}: trailing bytes")

    expected = {name for name, _, _ in param_spec(config)}
    if set(params) != expected:
        raise CheckpointError(
            f"{path}: tensor names {sorted(set(params) ^ expected)} do not "
            f"match the stored config"
        )
    return params, config, pos_vocab
