"""Writes tiny_clip/: a randomly initialized CLIP vision tower with projection,
a 32x32 grayscale probe image and the embedding transformers computes for it."""

import json
from pathlib import Path

import numpy as np
import torch
from transformers import CLIPVisionConfig, CLIPVisionModelWithProjection

out = Path(__file__).parent / "tiny_clip"
out.mkdir(exist_ok=True)

torch.manual_seed(0)
config = CLIPVisionConfig(
    hidden_size=32,
    intermediate_size=64,
    num_attention_heads=4,
    num_hidden_layers=2,
    image_size=32,
    patch_size=8,
    projection_dim=16,
    hidden_act="quick_gelu",
)
model = CLIPVisionModelWithProjection(config).eval()
# Larger-than-default weights so every block visibly shapes the output.
with torch.no_grad():
    for p in model.parameters():
        p.add_(0.05 * torch.randn_like(p))
model.save_pretrained(out, safe_serialization=True)

rng = np.random.default_rng(7)
image = np.zeros((32, 32), dtype=np.float32)
for y, x in rng.integers(0, 32, size=(28, 2)):
    image[y, x] = 1.0

mean = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
std = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)
pixels = (np.stack([image] * 3) - mean[:, None, None]) / std[:, None, None]
with torch.no_grad():
    embeds = model(pixel_values=torch.from_numpy(pixels[None])).image_embeds[0]

(out / "probe.json").write_text(
    json.dumps({"image": image.flatten().tolist(), "embedding": embeds.tolist()})
)
