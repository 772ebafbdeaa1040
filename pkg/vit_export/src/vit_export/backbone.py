"""Frozen vision-transformer backbones as dense per-pixel feature sources."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torchvision import models
from torchvision.transforms import functional as TF

_IMAGENET_MEAN = [0.485, 0.456, 0.406]
_IMAGENET_STD = [0.229, 0.224, 0.225]

_BACKBONES = {
    "vit_b_16": (models.vit_b_16, models.ViT_B_16_Weights),
    "vit_b_32": (models.vit_b_32, models.ViT_B_32_Weights),
    "vit_l_16": (models.vit_l_16, models.ViT_L_16_Weights),
}


class ViTFeatureSource:
    """Final-layer patch tokens of a torchvision ViT, bilinearly upsampled.

    ``weights="pretrained"`` loads the published checkpoint (needs network
    access on first use); ``weights="none"`` builds a seeded random-weight
    backbone, which keeps every run deterministic and is what the tests use.
    """

    def __init__(self, backbone: str = "vit_b_16", weights: str = "pretrained",
                 device: str = "cpu", seed: int = 0):
        if backbone not in _BACKBONES:
            raise ValueError(
                f"unknown backbone {backbone!r}; choose from {sorted(_BACKBONES)}"
            )
        ctor, weight_enum = _BACKBONES[backbone]
        if weights == "pretrained":
            model = ctor(weights=weight_enum.DEFAULT)
        elif weights == "none":
            torch.manual_seed(seed)
            model = ctor(weights=None)
        else:
            raise ValueError(f"weights must be 'pretrained' or 'none', got {weights!r}")
        self.device = torch.device(device)
        self.model = model.to(self.device).eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.input_size = model.image_size
        self.patch_size = model.patch_size
        self.channels = model.hidden_dim

    def _prepare(self, image) -> torch.Tensor:
        # PIL image -> normalized (1, 3, S, S) tensor at the backbone's size
        image = image.convert("RGB")
        t = TF.to_tensor(image)
        t = TF.resize(t, [self.input_size, self.input_size], antialias=True)
        t = TF.normalize(t, _IMAGENET_MEAN, _IMAGENET_STD)
        return t.unsqueeze(0).to(self.device)

    @torch.no_grad()
    def extract(self, image, target_hw: tuple[int, int]) -> np.ndarray:
        """Per-pixel features (channels, H, W) for one PIL image."""
        batch = self._prepare(image)
        x = self.model._process_input(batch)  # (1, n_patches, D)
        cls = self.model.class_token.expand(x.shape[0], -1, -1)
        tokens = self.model.encoder(torch.cat([cls, x], dim=1))[:, 1:, :]
        grid = self.input_size // self.patch_size
        fmap = tokens.reshape(1, grid, grid, self.channels).permute(0, 3, 1, 2)
        dense = F.interpolate(fmap, size=target_hw, mode="bilinear", align_corners=False)
        return dense.squeeze(0).cpu().numpy().astype(np.float32)
