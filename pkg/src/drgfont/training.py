"""Min-max training loop, checkpointing, and few-shot generation."""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .extractors import StandInLatentEncoder, StandInPerceptualExtractor
from .glyphs import GlyphImage, GlyphStore
from .losses import (
    CircleParams,
    DiscriminatorLossParts,
    GeneratorLossParts,
    LossReport,
    LossWeights,
    adv_loss_d,
    adv_loss_g,
    cls_loss,
    disentangle_loss,
    latent_loss,
    perceptual_loss,
    recon_loss,
    total_d,
    total_g,
)
from .nets import (
    DiscriminatorConfig,
    EncoderConfig,
    GeneratorNet,
    MultiTaskDiscriminator,
)
from .sampler import BatchSampler, TrainingBatch
from .selection import PreferenceTable, ReferenceSelector, rank_candidates
from .strokes import glyph_descriptors

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "drgfont-ckpt-v1"


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; references the last good checkpoint."""


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    circle: CircleParams = field(default_factory=CircleParams)
    device: str = "cpu"
    dtype: str = "float32"
    image_size: int = 64
    base_width: int = 64
    head_dim: int = 256
    disc_width: int | None = None
    rs_train: bool = True
    rs_test: bool = True
    enable_cls: bool = True
    enable_latent: bool = True
    checkpoint_every: int = 0  # steps; 0 = epoch ends only
    max_steps: int = 0  # 0 = no cap

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (triplets need in-batch negatives)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    @property
    def torch_dtype(self) -> torch.dtype:
        return getattr(torch, self.dtype)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))


class Trainer:
    """Owns generator/discriminator parameters and the optimization loop."""

    def __init__(
        self,
        store: GlyphStore,
        table: PreferenceTable,
        config: TrainConfig,
        out_dir: str | Path | None = None,
        perceptual_extractor=None,
        latent_extractor=None,
    ):
        self.store = store
        self.table = table
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        torch.manual_seed(config.seed)
        dtype = config.torch_dtype
        catalog = store.catalog
        self.n_styles = len(catalog.style_classes)
        enc_cfg = EncoderConfig(
            image_size=config.image_size,
            in_channels=1,
            base_width=config.base_width,
            head_dim=config.head_dim,
        )
        disc_cfg = DiscriminatorConfig(
            n_styles=self.n_styles,
            n_contents=catalog.n_chars,
            in_channels=1,
            base_width=config.disc_width or config.base_width,
        )
        self.gen = GeneratorNet(enc_cfg).to(device=config.device, dtype=dtype)
        self.disc = MultiTaskDiscriminator(disc_cfg).to(device=config.device, dtype=dtype)
        self.perceptual = (
            perceptual_extractor
            if perceptual_extractor is not None
            else StandInPerceptualExtractor(seed=config.seed)
        ).to(device=config.device, dtype=dtype)
        self.latent = (
            latent_extractor
            if latent_extractor is not None
            else StandInLatentEncoder(seed=config.seed)
        ).to(device=config.device, dtype=dtype)
        self.opt_g = torch.optim.Adam(
            self.gen.parameters(), lr=config.lr, betas=(config.beta1, config.beta2)
        )
        self.opt_d = torch.optim.Adam(
            self.disc.parameters(), lr=config.lr, betas=(config.beta1, config.beta2)
        )
        self.selector = ReferenceSelector(
            store, table, use_ranking=config.rs_train, seed=config.seed
        )
        self._sampler: BatchSampler | None = None
        self.step = 0
        self.epoch = 0
        self.last_checkpoint: Path | None = None

    @property
    def sampler(self) -> BatchSampler:
        # built on first use so generation-only stores (a single content
        # font) never hit the training-side catalog validation
        if self._sampler is None:
            self._sampler = BatchSampler(self.store, self.selector)
        return self._sampler

    # ------------------------------------------------------------------ data

    def _stack(self, glyphs: list[GlyphImage]) -> torch.Tensor:
        arr = np.stack([g.pixels for g in glyphs])[:, None, :, :]
        return torch.as_tensor(arr, device=self.config.device, dtype=self.config.torch_dtype)

    def _labels(self, batch: TrainingBatch) -> tuple[torch.Tensor, torch.Tensor]:
        catalog = self.store.catalog
        style = torch.tensor(
            [catalog.style_class_of(g.font_id) for g in batch.targets],
            device=self.config.device,
        )
        content = torch.tensor(
            [g.char_id for g in batch.targets], device=self.config.device
        )
        return style, content

    # ----------------------------------------------------------------- steps

    def train_step(self, batch: TrainingBatch) -> LossReport:
        """One discriminator update followed by one generator update."""
        cfg = self.config
        b = len(batch)
        stacked = self._stack(
            batch.style_refs
            + batch.content_refs
            + batch.targets
            + batch.style_negatives
            + batch.content_negatives
        )
        encoded = self.gen.encode(stacked)
        style_all = encoded.style
        content_all = encoded.content
        sl = slice(0, b)
        cl = slice(b, 2 * b)
        tl = slice(2 * b, 3 * b)
        nsl = slice(3 * b, 4 * b)
        ncl = slice(4 * b, 5 * b)
        y = stacked[tl]
        y_hat = self.gen.decode(style_all[sl], content_all[cl])
        style_labels, content_labels = self._labels(batch)

        zero = y_hat.new_zeros(())

        # discriminator update on real targets and detached fakes
        self.opt_d.zero_grad(set_to_none=True)
        real_out = self.disc(y)
        fake_out = self.disc(y_hat.detach())
        d_adv = adv_loss_d(real_out.adv_map, fake_out.adv_map)
        if cfg.enable_cls:
            d_cls = cls_loss(
                real_out.style_logits, real_out.content_logits, style_labels, content_labels
            )
        else:
            d_cls = zero
        d_total = total_d(DiscriminatorLossParts(adv=d_adv, cls=d_cls), cfg.weights)
        self._guard_finite(d_total, "discriminator total")
        d_total.backward(retain_graph=False)
        self.opt_d.step()

        # generator update against the refreshed discriminator
        self.opt_g.zero_grad(set_to_none=True)
        g_fake_out = self.disc(y_hat)
        parts = GeneratorLossParts(
            recon=recon_loss(y_hat, y),
            perc=perceptual_loss(y_hat, y, self.perceptual),
            dist=disentangle_loss(
                (style_all[sl], style_all[tl], style_all[nsl]),
                (content_all[cl], content_all[tl], content_all[ncl]),
                cfg.circle,
            ),
            latent=latent_loss(y_hat, y, self.latent) if cfg.enable_latent else zero,
            adv=adv_loss_g(g_fake_out.adv_map),
            cls=(
                cls_loss(
                    g_fake_out.style_logits,
                    g_fake_out.content_logits,
                    style_labels,
                    content_labels,
                )
                if cfg.enable_cls
                else zero
            ),
        )
        g_total = total_g(parts, cfg.weights)
        self._guard_finite(g_total, "generator total")
        g_total.backward()
        self.opt_g.step()

        self.step += 1
        scalar = lambda t: float(t.detach())  # noqa: E731
        return LossReport(
            step=self.step,
            values={
                "d_adv": scalar(d_adv),
                "d_cls": scalar(d_cls),
                "total_d": scalar(d_total),
                "recon": scalar(parts.recon),
                "perc": scalar(parts.perc),
                "dist": scalar(parts.dist),
                "latent": scalar(parts.latent),
                "adv_g": scalar(parts.adv),
                "cls_g": scalar(parts.cls),
                "total_g": scalar(g_total),
            },
        )

    def _guard_finite(self, value: torch.Tensor, what: str) -> None:
        if not torch.isfinite(value).all():
            ref = self.last_checkpoint or "none"
            raise TrainingDiverged(
                f"{what} went non-finite at step {self.step + 1}; last good checkpoint: {ref}"
            )

    # ------------------------------------------------------------------- fit

    def fit(self, log_file: str | Path | None = None) -> list[Path]:
        """Epoch loop over all (seen font, char) pairs with shuffled order.

        Returns the checkpoint paths written.  Training resumes from the
        trainer's current epoch/step, so loading a checkpoint and calling fit
        again continues the run.
        """
        cfg = self.config
        written: list[Path] = []
        log_fh = open(log_file, "a", encoding="utf-8") if log_file else None
        try:
            while self.epoch < cfg.epochs:
                rng = _epoch_rng(cfg.seed, self.epoch)
                order = [self.sampler.pairs[i] for i in rng.permutation(len(self.sampler.pairs))]
                for start in range(0, len(order), cfg.batch_size):
                    chunk = order[start : start + cfg.batch_size]
                    batch = self.sampler.batch_from_pairs(chunk, rng)
                    if batch is None:
                        continue
                    report = self.train_step(batch)
                    line = report.to_line()
                    log.info("%s", line)
                    if log_fh:
                        log_fh.write(line + "\n")
                        log_fh.flush()
                    if cfg.checkpoint_every and self.step % cfg.checkpoint_every == 0:
                        written.append(self.save_checkpoint())
                    if cfg.max_steps and self.step >= cfg.max_steps:
                        written.append(self.save_checkpoint())
                        return written
                self.epoch += 1
                written.append(self.save_checkpoint())
        finally:
            if log_fh:
                log_fh.close()
        return written

    # -------------------------------------------------------------- generate

    def generate(
        self,
        style_refs: list[GlyphImage],
        target_chars: list[int],
        rng_seed: int = 0,
    ) -> list[np.ndarray]:
        """Synthesize glyphs for target characters from few-shot references."""
        return generate_glyphs(
            self.gen,
            self.store,
            style_refs,
            target_chars,
            rs_enabled=self.config.rs_test,
            rng_seed=rng_seed,
            device=self.config.device,
            dtype=self.config.torch_dtype,
        )

    # ----------------------------------------------------------- checkpoints

    def save_checkpoint(self, path: str | Path | None = None) -> Path:
        if path is None:
            if self.out_dir is None:
                raise ValueError("no out_dir configured and no explicit path given")
            path = self.out_dir / f"checkpoint_{self.step:08d}.pt"
        path = Path(path)
        params = dict(self.gen.state_dict())
        params.update({f"disc.{k}": v for k, v in self.disc.state_dict().items()})
        payload = {
            "format": CHECKPOINT_FORMAT,
            "step": self.step,
            "epoch": self.epoch,
            "config": asdict(self.config),
            "params": params,
            "optim_g": self.opt_g.state_dict(),
            "optim_d": self.opt_d.state_dict(),
            "torch_rng": torch.get_rng_state(),
        }
        tmp = path.with_suffix(path.suffix + ".tmp")
        torch.save(payload, tmp)
        os.replace(tmp, path)
        self.last_checkpoint = path
        return path

    def load_checkpoint(self, path: str | Path) -> None:
        payload = torch.load(path, map_location=self.config.device, weights_only=False)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a recognized checkpoint")
        gen_state = {
            k: v for k, v in payload["params"].items() if not k.startswith("disc.")
        }
        disc_state = {
            k[len("disc.") :]: v
            for k, v in payload["params"].items()
            if k.startswith("disc.")
        }
        self.gen.load_state_dict(gen_state)
        self.disc.load_state_dict(disc_state)
        self.opt_g.load_state_dict(payload["optim_g"])
        self.opt_d.load_state_dict(payload["optim_d"])
        torch.set_rng_state(payload["torch_rng"].cpu())
        self.step = payload["step"]
        self.epoch = payload["epoch"]
        self.last_checkpoint = Path(path)

    @staticmethod
    def peek_config(path: str | Path) -> TrainConfig:
        """Read the TrainConfig stored in a checkpoint."""
        payload = torch.load(path, map_location="cpu", weights_only=False)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a recognized checkpoint")
        return _config_from_payload(payload)


def _config_from_payload(payload) -> TrainConfig:
    raw = dict(payload["config"])
    raw["weights"] = LossWeights(**raw["weights"])
    raw["circle"] = CircleParams(**raw["circle"])
    return TrainConfig(**raw)


def choose_references(
    store: GlyphStore,
    style_refs: list[GlyphImage],
    target_chars: list[int],
    rs_enabled: bool = True,
    rng_seed: int = 0,
) -> list[int]:
    """Index of the reference to use for each target character.

    The provided references act as the candidate pool; the structurally
    closest one (scored against the content-font rendering of the target) is
    chosen, excluding same-character references whenever an alternative
    exists.  With selection disabled the pick is a seeded uniform draw.
    """
    if not style_refs:
        raise ValueError("at least one style reference is required")
    content_font = store.catalog.content_font
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([rng_seed, 0xF])))
    ref_desc = [(i, glyph_descriptors(g)) for i, g in enumerate(style_refs)]
    choices = []
    for char_id in target_chars:
        if not store.has(content_font, char_id):
            if 0 <= char_id < store.catalog.n_chars:
                label = f"U+{store.catalog.codepoints[char_id]:04X}"
            else:
                label = f"char id {char_id}"
            raise KeyError(f"content font has no glyph for {label}")
        candidates = [(i, d) for i, d in ref_desc if style_refs[i].char_id != char_id]
        if not candidates:
            candidates = ref_desc  # only same-character references exist
        if rs_enabled:
            content_glyph = store.get(content_font, char_id)
            ranking = rank_candidates(glyph_descriptors(content_glyph), candidates)
            choices.append(ranking[0][0])
        else:
            choices.append(candidates[rng.integers(len(candidates))][0])
    return choices


def generate_glyphs(
    gen: GeneratorNet,
    store: GlyphStore,
    style_refs: list[GlyphImage],
    target_chars: list[int],
    rs_enabled: bool = True,
    rng_seed: int = 0,
    device: str = "cpu",
    dtype: torch.dtype = torch.float32,
) -> list[np.ndarray]:
    """Few-shot synthesis: pick a reference per target, cross-fuse, decode."""
    choices = choose_references(store, style_refs, target_chars, rs_enabled, rng_seed)
    content_font = store.catalog.content_font
    picked = [style_refs[i] for i in choices]
    contents = [store.get(content_font, c) for c in target_chars]

    def stack(glyphs):
        arr = np.stack([g.pixels for g in glyphs])[:, None, :, :]
        return torch.as_tensor(arr, device=device, dtype=dtype)

    was_training = gen.training
    gen.eval()
    try:
        with torch.no_grad():
            out = gen.synthesize(stack(picked), stack(contents))
    finally:
        gen.train(was_training)
    return [out[i, 0].cpu().numpy() for i in range(out.shape[0])]


def load_generator(path: str | Path, device: str = "cpu") -> tuple[GeneratorNet, TrainConfig]:
    """Restore only the generator from a checkpoint (for generation and
    evaluation flows that never touch the discriminator)."""
    payload = torch.load(path, map_location=device, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a recognized checkpoint")
    config = _config_from_payload(payload)
    gen = GeneratorNet(
        EncoderConfig(
            image_size=config.image_size,
            in_channels=1,
            base_width=config.base_width,
            head_dim=config.head_dim,
        )
    ).to(device=device, dtype=config.torch_dtype)
    gen_state = {k: v for k, v in payload["params"].items() if not k.startswith("disc.")}
    gen.load_state_dict(gen_state)
    gen.eval()
    return gen, config
