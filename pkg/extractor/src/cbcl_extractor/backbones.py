"""Backbone construction and second-FC-layer feature heads.

The extraction head is the network truncated right after its second
fully-connected layer (raw linear output, before the activation). Models
run in eval mode so dropout is inert and extraction is deterministic.
"""

import torch
from torch import nn
from torchvision import models

BACKBONES = ("vgg16", "alexnet", "tiny")


class TinyBackbone(nn.Module):
    """Small offline backbone for tests and smoke runs (fc2 width 32)."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 8, kernel_size=7, stride=4),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(4),
        )
        self.classifier = nn.Sequential(
            nn.Linear(8 * 16, 64),
            nn.ReLU(inplace=True),
            nn.Linear(64, 32),
        )

    def forward(self, x):
        x = self.features(x)
        x = torch.flatten(x, 1)
        return self.classifier(x)


def _truncate_after_second_linear(model: nn.Module) -> tuple[nn.Module, int]:
    """Head ending at the second nn.Linear of the torchvision classifier."""
    linear_positions = [
        i for i, mod in enumerate(model.classifier) if isinstance(mod, nn.Linear)
    ]
    if len(linear_positions) < 2:
        raise ValueError("backbone classifier has fewer than two fully-connected layers")
    cut = linear_positions[1]
    width = model.classifier[cut].out_features
    head = nn.Sequential(
        model.features,
        model.avgpool,
        nn.Flatten(1),
        *list(model.classifier.children())[: cut + 1],
    )
    return head, width


def build_feature_head(backbone: str, weights: str, seed: int) -> tuple[nn.Module, int]:
    """Construct the truncated feature head for ``backbone``.

    ``weights`` is one of:
      * a filesystem path to a full-model state dict (loaded before truncation),
      * ``"imagenet"`` for torchvision's pretrained weights (downloads),
      * ``"none"`` for a seeded random initialization (offline, deterministic).

    Returns the head (in eval mode) and its output width.
    """
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}; choose from {BACKBONES}")
    torch.manual_seed(seed)
    if backbone == "tiny":
        model = TinyBackbone()
        if weights not in ("none", "imagenet"):
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        model.eval()
        head, width = nn.Sequential(model.features, nn.Flatten(1), model.classifier), 32
        head.eval()
        return head, width

    factory = {"vgg16": models.vgg16, "alexnet": models.alexnet}[backbone]
    if weights == "imagenet":
        model = factory(weights="IMAGENET1K_V1")
    else:
        model = factory(weights=None)
        if weights != "none":
            state = torch.load(weights, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
    head, width = _truncate_after_second_linear(model)
    head.eval()
    return head, width
