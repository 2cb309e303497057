"""Proxy-task record builders over generated samples.

Three streams are derived from each batch of samples: masked-token
reconstruction, instruction/trajectory matching against hard negatives,
and stepwise next-action targets.  Only the records are produced here;
model training is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .actions import Action
from .errors import UnshuffleableError
from .jsonl import write_json, write_jsonl
from .trajectory import VlnSample

MASK_TOKEN = "[MASK]"
DEFAULT_MASK_PROB = 0.15
# masked token becomes: MASK marker / random vocab token / left unchanged
DEFAULT_REPLACEMENT_SPLIT = (0.8, 0.1, 0.1)
ITM_CANDIDATE_COUNT = 5
ITM_SHUFFLE_RETRIES = 10
DEFAULT_SHARD_SIZE = 64


@dataclass(frozen=True)
class MlmSample:
    sample_id: str
    tokens: tuple[str, ...]
    masked_positions: tuple[int, ...]
    targets: tuple[str, ...]
    frames: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("token sequence is empty")
        if not self.masked_positions:
            raise ValueError("at least one position must be masked")
        if len(self.masked_positions) != len(self.targets):
            raise ValueError("positions and targets must align")
        last = -1
        for pos in self.masked_positions:
            if not last < pos < len(self.tokens):
                raise ValueError(f"masked position {pos} out of order or range")
            last = pos

    def restored_tokens(self) -> tuple[str, ...]:
        """Original token sequence, reconstructed from the targets."""
        out = list(self.tokens)
        for pos, tok in zip(self.masked_positions, self.targets):
            out[pos] = tok
        return tuple(out)

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "tokens": list(self.tokens),
            "masked_positions": list(self.masked_positions),
            "targets": list(self.targets),
            "frames": list(self.frames),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "MlmSample":
        return cls(
            sample_id=doc["sample_id"],
            tokens=tuple(doc["tokens"]),
            masked_positions=tuple(doc["masked_positions"]),
            targets=tuple(doc["targets"]),
            frames=tuple(doc["frames"]),
        )


@dataclass(frozen=True)
class ItmSample:
    sample_id: str
    instruction: str
    candidates: tuple[tuple[str, ...], ...]
    positive_index: int

    def __post_init__(self):
        if len(self.candidates) != ITM_CANDIDATE_COUNT:
            raise ValueError(f"expected {ITM_CANDIDATE_COUNT} candidates")
        if not 0 <= self.positive_index < len(self.candidates):
            raise ValueError("positive index out of range")

    @property
    def positive(self) -> tuple[str, ...]:
        return self.candidates[self.positive_index]

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "instruction": self.instruction,
            "candidates": [list(c) for c in self.candidates],
            "positive_index": self.positive_index,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "ItmSample":
        return cls(
            sample_id=doc["sample_id"],
            instruction=doc["instruction"],
            candidates=tuple(tuple(c) for c in doc["candidates"]),
            positive_index=doc["positive_index"],
        )


@dataclass(frozen=True)
class NapSample:
    sample_id: str
    step: int
    instruction: str
    history: tuple[str, ...]
    target: Action

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if len(self.history) != self.step + 1:
            raise ValueError("history must cover frames 0..step")

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "step": self.step,
            "instruction": self.instruction,
            "history": list(self.history),
            "target": self.target.value,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "NapSample":
        return cls(
            sample_id=doc["sample_id"],
            step=doc["step"],
            instruction=doc["instruction"],
            history=tuple(doc["history"]),
            target=Action(doc["target"]),
        )


def build_mlm(
    sample: VlnSample,
    rng: np.random.Generator,
    mask_prob: float = DEFAULT_MASK_PROB,
    *,
    replacement_split: tuple[float, float, float] = DEFAULT_REPLACEMENT_SPLIT,
    vocab: Sequence[str] | None = None,
) -> MlmSample:
    tokens = tuple(sample.instruction.split())
    if not tokens:
        raise ValueError("instruction is empty")
    if not 0.0 < mask_prob <= 1.0:
        raise ValueError("mask_prob must lie in (0, 1]")
    p_mask, p_random, p_keep = replacement_split
    if min(p_mask, p_random, p_keep) < 0 or abs(p_mask + p_random + p_keep - 1.0) > 1e-9:
        raise ValueError("replacement split must be non-negative and sum to 1")
    if vocab is None:
        vocab = sorted(set(tokens))

    # resample the whole mask vector until something is masked
    while True:
        mask = rng.random(len(tokens)) < mask_prob
        if mask.any():
            break

    out = list(tokens)
    positions: list[int] = []
    targets: list[str] = []
    for i in np.flatnonzero(mask):
        i = int(i)
        positions.append(i)
        targets.append(tokens[i])
        u = rng.random()
        if u < p_mask:
            out[i] = MASK_TOKEN
        elif u < p_mask + p_random:
            out[i] = vocab[int(rng.integers(len(vocab)))]
        # else: token stays, but still counts as a prediction target
    return MlmSample(sample.sample_id, tuple(out), tuple(positions), tuple(targets), sample.frames)


def shuffled_frames(frames: Sequence[str], rng: np.random.Generator) -> tuple[str, ...]:
    """Permutation of `frames` whose order differs from the original."""
    original = tuple(frames)
    if len(original) < 2:
        raise UnshuffleableError("need at least two frames to reorder")
    for _ in range(ITM_SHUFFLE_RETRIES):
        perm = rng.permutation(len(original))
        candidate = tuple(original[int(j)] for j in perm)
        if candidate != original:
            return candidate
    # only reachable when every frame ref is identical
    raise UnshuffleableError("no order-changing permutation found")


def build_itm(
    sample: VlnSample,
    pool: Sequence[VlnSample],
    rng: np.random.Generator,
) -> ItmSample:
    others = [p for p in pool if p.sample_id != sample.sample_id]
    if len(others) < 2:
        raise ValueError("negative pool must contain at least two other samples")
    if len(sample.frames) < 2:
        raise UnshuffleableError(f"{sample.sample_id}: trajectory too short to shuffle")

    picked = rng.choice(len(others), size=2, replace=False)
    in_batch = [others[int(i)].frames for i in picked]
    shuffles = [shuffled_frames(sample.frames, rng) for _ in range(2)]

    candidates = [sample.frames, *in_batch, *shuffles]
    order = rng.permutation(ITM_CANDIDATE_COUNT)
    positive_index = int(np.flatnonzero(order == 0)[0])
    return ItmSample(
        sample_id=sample.sample_id,
        instruction=sample.instruction,
        candidates=tuple(candidates[int(i)] for i in order),
        positive_index=positive_index,
    )


def build_nap(sample: VlnSample) -> list[NapSample]:
    """One record per step; the terminal step targets STOP over the full history."""
    if len(sample.actions) < 2:
        raise ValueError("sample must contain at least one primitive action")
    return [
        NapSample(
            sample_id=sample.sample_id,
            step=t,
            instruction=sample.instruction,
            history=sample.frames[: t + 1],
            target=action,
        )
        for t, action in enumerate(sample.actions)
    ]


def shard_samples(samples: Sequence[VlnSample], shard_size: int) -> list[list[VlnSample]]:
    """Canonically ordered shards; batching is by sorted sample id, not input order."""
    if shard_size < 1:
        raise ValueError("shard_size must be positive")
    ordered = sorted(samples, key=lambda s: s.sample_id)
    for a, b in zip(ordered, ordered[1:]):
        if a.sample_id == b.sample_id:
            raise ValueError(f"duplicate sample id {a.sample_id!r}")
    return [list(ordered[i : i + shard_size]) for i in range(0, len(ordered), shard_size)]


def build_pretrain_records(
    samples: Sequence[VlnSample],
    seed: int,
    shard_size: int = DEFAULT_SHARD_SIZE,
    mask_prob: float = DEFAULT_MASK_PROB,
) -> tuple[list[MlmSample], list[ItmSample], list[NapSample], dict]:
    mlm: list[MlmSample] = []
    itm: list[ItmSample] = []
    nap: list[NapSample] = []
    skipped_short = 0
    skipped_small_shard = 0

    shards = shard_samples(samples, shard_size)
    for shard_index, shard in enumerate(shards):
        rng = np.random.default_rng([seed, shard_index])
        vocab = sorted({tok for s in shard for tok in s.instruction.split()})
        for s in shard:
            mlm.append(build_mlm(s, rng, mask_prob, vocab=vocab))
        if len(shard) < 3:
            # no in-batch negatives possible for this shard
            skipped_small_shard += len(shard)
        else:
            for s in shard:
                try:
                    itm.append(build_itm(s, shard, rng))
                except UnshuffleableError:
                    skipped_short += 1
        for s in shard:
            nap.extend(build_nap(s))

    manifest = {
        "seed": seed,
        "shard_size": shard_size,
        "samples_in": len(samples),
        "shards": len(shards),
        "counts": {"mlm": len(mlm), "itm": len(itm), "nap": len(nap)},
        "itm_skipped": {
            "short_trajectory": skipped_short,
            "small_shard": skipped_small_shard,
        },
    }
    return mlm, itm, nap, manifest


def write_pretrain(
    samples: Sequence[VlnSample],
    out_dir: str | Path,
    seed: int,
    shard_size: int = DEFAULT_SHARD_SIZE,
    mask_prob: float = DEFAULT_MASK_PROB,
) -> dict:
    """Emit mlm.jsonl / itm.jsonl / nap.jsonl plus manifest.json; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mlm, itm, nap, manifest = build_pretrain_records(samples, seed, shard_size, mask_prob)
    write_jsonl(out_dir / "mlm.jsonl", (r.to_json_dict() for r in mlm))
    write_jsonl(out_dir / "itm.jsonl", (r.to_json_dict() for r in itm))
    write_jsonl(out_dir / "nap.jsonl", (r.to_json_dict() for r in nap))
    write_json(out_dir / "manifest.json", manifest)
    return manifest
