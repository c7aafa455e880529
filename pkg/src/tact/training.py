"""Adam training loop and JSON checkpoints."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from tact import autodiff as ad
from tact.errors import CheckpointError, ConfigError, NumericError
from tact.kg import KnowledgeGraph, Triple
from tact.model import SCOPES, TactModel, exclusion
from tact.rcn import normalize_variant
from tact.scoring import ScoreParts, hinge_loss, sample_negatives_batch

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "tact-checkpoint"
CHECKPOINT_VERSION = 1

_MARGINS = {"wn18rr": 8.0, "fb15k-237": 16.0, "fb15k237": 16.0, "nell-995": 10.0, "nell995": 10.0}


def default_margin(dataset_name: str) -> float:
    """Margin by benchmark family, inferred from a dataset directory name."""
    name = dataset_name.lower()
    for key, value in _MARGINS.items():
        if name.startswith(key):
            return value
    return 8.0


@dataclass
class TrainConfig:
    lr: float = 0.01
    batch_size: int = 16
    epochs: int = 10
    margin: float = 8.0
    hops: int = 2
    layers: int = 2
    dim: int = 32
    n_neg: int = 1
    neg_rel: float = 0.0
    seed: int = 0
    parts: str = "ngr"
    variant: str = "full"
    scope: str = "local"
    early_stop: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("lr", "batch_size", "margin", "hops", "layers", "dim", "n_neg"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.neg_rel <= 1.0:
            raise ConfigError(f"neg_rel must lie in [0, 1], got {self.neg_rel}")
        if self.dim < 2:
            raise ConfigError("dim must be at least 2 to hold the target labels")
        self.parts = str(ScoreParts.parse(self.parts))
        self.variant = normalize_variant(self.variant)
        if self.scope not in SCOPES:
            raise ConfigError(f"unknown scope {self.scope!r}")

    def build_model(self, num_relations: int) -> TactModel:
        return TactModel(
            num_relations,
            dim=self.dim,
            layers=self.layers,
            hops=self.hops,
            parts=self.parts,
            variant=self.variant,
            scope=self.scope,
            seed=self.seed,
        )


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, params: dict[str, ad.Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(params: dict[str, ad.Tensor], grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place, in parameter order."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise NumericError(f"gradient shape {g.shape} does not match {name} {p.data.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class Checkpoint:
    meta: dict
    tensors: dict[str, np.ndarray]
    history: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def config(self) -> TrainConfig:
        fields = {_META_TO_CONFIG.get(k, k): v for k, v in self.meta.items()}
        keys = TrainConfig.__dataclass_fields__
        try:
            return TrainConfig(**{k: v for k, v in fields.items() if k in keys})
        except ConfigError as exc:
            raise CheckpointError(f"invalid checkpoint hyperparameters: {exc}") from None

    @property
    def relations(self) -> list[str]:
        return list(self.meta["relations"])

    def model(self) -> TactModel:
        model = self.config.build_model(len(self.relations))
        params = model.parameters()
        if set(params) != set(self.tensors):
            missing = sorted(set(params) ^ set(self.tensors))
            raise CheckpointError(f"checkpoint tensors do not match the model: {missing[:5]}")
        for name, p in params.items():
            arr = self.tensors[name]
            if arr.shape != p.data.shape:
                raise CheckpointError(f"{name}: shape {arr.shape}, model expects {p.data.shape}")
            p.data = arr.copy()
        return model

    def equals(self, other: "Checkpoint") -> bool:
        return (
            self.meta == other.meta
            and self.tensors.keys() == other.tensors.keys()
            and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)
        )


_CONFIG_TO_META = {"dim": "d", "layers": "L", "hops": "k"}
_META_TO_CONFIG = {v: k for k, v in _CONFIG_TO_META.items()}


def make_checkpoint(model: TactModel, config: TrainConfig, relations: Sequence[str], history=()) -> Checkpoint:
    meta = {_CONFIG_TO_META.get(k, k): v for k, v in asdict(config).items()}
    meta["relations"] = list(relations)
    return Checkpoint(
        meta=meta,
        tensors={k: p.data.copy() for k, p in model.parameters().items()},
        history=list(history),
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": ckpt.meta,
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in ckpt.tensors.items()
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path, expect_dim: int | None = None) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a JSON checkpoint ({exc})") from None
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format/version")
    meta = doc["meta"]
    if expect_dim is not None and meta.get("d") != expect_dim:
        raise CheckpointError(f"{path}: checkpoint d={meta.get('d')} but d={expect_dim} was expected")
    tensors = {}
    for name, t in doc["tensors"].items():
        shape = tuple(t["shape"])
        data = np.array(t["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}: tensor {name} has {data.size} values for shape {shape}")
        tensors[name] = data.reshape(shape)
    ckpt = Checkpoint(meta=meta, tensors=tensors)
    ckpt.model()  # validates shapes against the declared hyperparameters
    return ckpt


def train(
    kg: KnowledgeGraph,
    config: TrainConfig,
    valid: Sequence[Triple] = (),
    on_batch: Callable[[int, int, float], None] | None = None,
) -> Checkpoint:
    """Train on every triple of ``kg`` (each scored with itself held out)."""
    config.validate()
    if len(kg) == 0:
        raise ConfigError("cannot train on an empty graph")
    if kg.num_entities < 3:
        raise ConfigError("training needs at least three entities for irreflexive negatives")
    model = config.build_model(kg.num_relations)
    params = model.parameters()
    names = list(params)
    tensors = [params[k] for k in names]
    state = AdamState.like(params)
    ctx = model.context(kg)
    rng = np.random.default_rng([config.seed, 1])
    eval_rng_seed = [config.seed, 2]
    history: list[tuple[int, int, float]] = []
    best = None
    best_auc = -1.0
    positives = list(kg.triples)

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(positives))
        epoch_loss = 0.0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [positives[i] for i in order[start : start + config.batch_size]]
            negatives = sample_negatives_batch(kg, batch, config.n_neg, rng, config.neg_rel)
            try:
                sources = batch + [t for t in batch for _ in range(config.n_neg)]
                excludes = [exclusion(kg, t, src) for t, src in zip(batch + negatives, sources)]
                with ad.Tape() as tape:
                    scores = model.forward(ctx, batch + negatives, excludes)
                    pos = ad.gather_rows(scores, np.arange(len(batch)))
                    neg = ad.gather_rows(scores, np.arange(len(batch), len(batch) + len(negatives)))
                    loss = hinge_loss(pos, neg, config.margin)
                grads = ad.backward(tape, loss, tensors) if loss.requires_grad else {}
                adam_step(params, {k: grads[params[k]] for k in names if params[k] in grads}, state, config.lr)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch} batch {b}: {exc}") from exc
            value = loss.item()
            epoch_loss += value
            history.append((epoch, b, value))
            if on_batch is not None:
                on_batch(epoch, b, value)
        log.info("epoch %d loss %.4f (%.1fs)", epoch, epoch_loss, time.perf_counter() - t0)
        if config.early_stop and valid:
            from tact.evaluate import classification_eval

            auc = classification_eval(model, ctx, valid, seed=eval_rng_seed)["auc_pr"]
            log.info("epoch %d valid auc-pr %.4f", epoch, auc)
            if auc > best_auc:
                best_auc = auc
                best = {k: p.data.copy() for k, p in params.items()}
    if best is not None:
        for k, p in params.items():
            p.data = best[k]
    return make_checkpoint(model, config, kg.relation_vocab.items(), history)
