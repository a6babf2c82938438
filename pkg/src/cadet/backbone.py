"""Tiny vision transformer with per-layer learnable prompt injection.

Token layout is [image tokens | prompts | class token].  At every layer up to
the prompt depth the prompt slots are overwritten with that layer's fresh
learnable tokens before the block runs, and the block's outputs at those
slots are discarded afterwards; deeper layers see only image and class
tokens.  The final-layer class token is the image feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .engine.rng import Rng
from .engine.tensor import (
    Parameter,
    Tensor,
    broadcast_rows,
    concat,
    layer_norm,
    linear,
    multi_head_attention,
)

INIT_STD = 0.02

TUNING_MODES = ("full-finetune", "prompt-tune", "heads-only")


@dataclass(frozen=True)
class BackboneConfig:
    image_size: int = 32
    channels: int = 1
    patch_size: int = 4
    embed_dim: int = 32
    layers: int = 4
    heads: int = 2
    mlp_ratio: float = 2.0
    prompt_length: int = 4
    prompt_depth: int = 3

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ValueError("image size must be divisible by patch size")
        if self.embed_dim % self.heads:
            raise ValueError("embed dim must be divisible by head count")
        if not 0 <= self.prompt_depth <= self.layers:
            raise ValueError("prompt depth must lie in [0, layers]")

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels


def prompt_param_count(length: int, dim: int, depth: int) -> int:
    """Learnable parameters added by prompt tokens: length * dim * depth."""
    if length < 0 or dim < 0 or depth < 0:
        raise ValueError("prompt accounting takes non-negative arguments")
    return length * dim * depth


class PromptSet:
    """One l x d prompt matrix per prompted layer, owned by a session."""

    def __init__(self, cfg: BackboneConfig, session: int, rng: Rng, dtype=None):
        self.session = session
        self.cfg = cfg
        self.tokens = [
            Parameter(INIT_STD * rng.normal(cfg.prompt_length * cfg.embed_dim)
                      .reshape(cfg.prompt_length, cfg.embed_dim),
                      name=f"prompts.s{session}.layer{i}", dtype=dtype)
            for i in range(1, cfg.prompt_depth + 1)
        ]

    def named_params(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.tokens}

    def check_compatible(self, cfg: BackboneConfig):
        if len(self.tokens) != cfg.prompt_depth:
            raise ValueError(f"prompt set depth {len(self.tokens)} != config {cfg.prompt_depth}")
        for p in self.tokens:
            if p.data.shape != (cfg.prompt_length, cfg.embed_dim):
                raise ValueError(f"prompt shape {p.data.shape} != "
                                 f"({cfg.prompt_length}, {cfg.embed_dim})")


class TinyViT:
    """From-scratch pre-norm transformer encoder over image patches."""

    def __init__(self, cfg: BackboneConfig, rng: Rng, dtype=None):
        self.cfg = cfg
        self.dtype = dtype
        d = cfg.embed_dim

        def par(name, shape, std=INIT_STD):
            n = int(np.prod(shape))
            return Parameter(std * rng.normal(n).reshape(shape), name=name, dtype=dtype)

        def zeros(name, shape):
            return Parameter(np.zeros(shape), name=name, dtype=dtype)

        def ones(name, shape):
            return Parameter(np.ones(shape), name=name, dtype=dtype)

        self.patch_w = par("patch.weight", (cfg.patch_dim, d))
        self.patch_b = zeros("patch.bias", (d,))
        self.pos = par("patch.pos", (cfg.n_patches, d))
        self.cls = par("cls_token", (1, d))
        self.blocks = []
        hidden = int(d * cfg.mlp_ratio)
        for i in range(cfg.layers):
            pre = f"block{i}."
            self.blocks.append({
                "ln1_g": ones(pre + "ln1.gain", (d,)),
                "ln1_b": zeros(pre + "ln1.bias", (d,)),
                "wq": par(pre + "attn.wq", (d, d)),
                "bq": zeros(pre + "attn.bq", (d,)),
                "wk": par(pre + "attn.wk", (d, d)),
                "bk": zeros(pre + "attn.bk", (d,)),
                "wv": par(pre + "attn.wv", (d, d)),
                "bv": zeros(pre + "attn.bv", (d,)),
                "wo": par(pre + "attn.wo", (d, d)),
                "bo": zeros(pre + "attn.bo", (d,)),
                "ln2_g": ones(pre + "ln2.gain", (d,)),
                "ln2_b": zeros(pre + "ln2.bias", (d,)),
                "w1": par(pre + "mlp.w1", (d, hidden)),
                "b1": zeros(pre + "mlp.b1", (hidden,)),
                "w2": par(pre + "mlp.w2", (hidden, d)),
                "b2": zeros(pre + "mlp.b2", (d,)),
            })
        self.final_ln_g = ones("final_ln.gain", (d,))
        self.final_ln_b = zeros("final_ln.bias", (d,))

    def named_params(self) -> dict[str, Parameter]:
        out = {p.name: p for p in (self.patch_w, self.patch_b, self.pos, self.cls,
                                   self.final_ln_g, self.final_ln_b)}
        for blk in self.blocks:
            for p in blk.values():
                out[p.name] = p
        return out

    def param_count(self) -> int:
        return sum(p.data.size for p in self.named_params().values())

    # -- forward -------------------------------------------------------------

    def _extract_patches(self, images: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        if images.ndim == 3:
            images = images[..., None]
        b, h, w, c = images.shape
        if h != cfg.image_size or w != cfg.image_size or c != cfg.channels:
            raise ValueError(
                f"image batch {images.shape[1:]} does not match config "
                f"({cfg.image_size}, {cfg.image_size}, {cfg.channels})"
            )
        p = cfg.patch_size
        grid = images.reshape(b, h // p, p, w // p, p, c)
        return grid.transpose(0, 1, 3, 2, 4, 5).reshape(b, cfg.n_patches, cfg.patch_dim)

    def patchify(self, images: np.ndarray) -> Tensor:
        """Initial token sequence [image tokens | class token], before prompts."""
        patches = self._extract_patches(np.asarray(images))
        b = patches.shape[0]
        x = Tensor(patches, dtype=self.dtype)
        tok = linear(x, self.patch_w, self.patch_b) + self.pos
        cls = broadcast_rows(self.cls, b)
        return concat([tok, cls], axis=1)

    def _block(self, x: Tensor, blk: dict) -> Tensor:
        h = layer_norm(x, blk["ln1_g"], blk["ln1_b"])
        att = multi_head_attention(h, blk["wq"], blk["bq"], blk["wk"], blk["bk"],
                                   blk["wv"], blk["bv"], blk["wo"], blk["bo"],
                                   heads=self.cfg.heads)
        x = x + att
        h2 = layer_norm(x, blk["ln2_g"], blk["ln2_b"])
        m = linear(linear(h2, blk["w1"], blk["b1"]).gelu(), blk["w2"], blk["b2"])
        return x + m

    def encode(self, images: np.ndarray, prompts: PromptSet | None = None) -> Tensor:
        """Class-token feature of each image, [B, embed_dim].

        With prompts, layer i <= depth sees [image | prompts_i | cls]; the
        previous layer's prompt outputs are discarded, so every prompted
        layer starts from its own fresh tokens.
        """
        cfg = self.cfg
        if prompts is not None:
            prompts.check_compatible(cfg)
        x = self.patchify(images)
        n = cfg.n_patches
        b = x.shape[0]
        for i, blk in enumerate(self.blocks, start=1):
            prompted = prompts is not None and i <= cfg.prompt_depth and cfg.prompt_length > 0
            if prompted:
                p_b = broadcast_rows(prompts.tokens[i - 1], b)
                x_in = concat([x[:, :n], p_b, x[:, n:]], axis=1)
            else:
                x_in = x
            x_out = self._block(x_in, blk)
            if prompted:
                x = concat([x_out[:, :n], x_out[:, -1:]], axis=1)
            else:
                x = x_out
        x = layer_norm(x, self.final_ln_g, self.final_ln_b)
        return x[:, -1]


def set_trainable(mode: str, backbone: TinyViT, prompt_sets: Iterable[PromptSet] = (),
                  head_params: Iterable[Parameter] = ()):
    """Flip trainability per tuning mode.

    full-finetune: everything trains.  prompt-tune: backbone frozen, prompts
    and heads train.  heads-only: heads train, all else frozen.
    """
    if mode not in TUNING_MODES:
        raise ValueError(f"unknown tuning mode {mode!r}; expected one of {TUNING_MODES}")
    train_backbone = mode == "full-finetune"
    train_prompts = mode in ("full-finetune", "prompt-tune")
    for p in backbone.named_params().values():
        p.trainable = train_backbone
    for ps in prompt_sets:
        for p in ps.tokens:
            p.trainable = train_prompts
    for p in head_params:
        p.trainable = True
