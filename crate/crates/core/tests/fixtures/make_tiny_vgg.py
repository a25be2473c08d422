"""Writes tiny_vgg/: a narrow VGG feature stack in torchvision layout, two
probe images and the perceptual loss torch computes between them at
relu1_2, relu2_2, relu3_2 and relu4_2."""

import json
from pathlib import Path

import torch
from safetensors.torch import save_file
from torchvision.models.vgg import make_layers

out = Path(__file__).parent / "tiny_vgg"
out.mkdir(exist_ok=True)

torch.manual_seed(1)
features = make_layers([4, 4, "M", 8, 8, "M", 8, 8, 8, 8, "M", 16, 16, 16, 16]).eval()
with torch.no_grad():
    for p in features.parameters():
        p.copy_(0.3 * torch.randn_like(p))
save_file({f"features.{k}": v.contiguous() for k, v in features.state_dict().items()},
          str(out / "model.safetensors"))

taps = {3, 8, 13, 22}  # ReLU indices of relu1_2, relu2_2, relu3_2, relu4_2
mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


def feats(x):
    h = (x - mean) / std
    out = []
    for i, layer in enumerate(features):
        h = layer(h)
        if i in taps:
            out.append(h)
        if i == max(taps):
            break
    return out


s = torch.rand(1, 3, 32, 32, generator=torch.Generator().manual_seed(2))
y = torch.rand(1, 3, 32, 32, generator=torch.Generator().manual_seed(3))
with torch.no_grad():
    loss = sum((a - b).abs().sum() for a, b in zip(feats(s), feats(y))) / len(taps)
    shapes = [list(f.shape) for f in feats(s)]

(out / "probe.json").write_text(json.dumps({
    "s": s.flatten().tolist(),
    "y": y.flatten().tolist(),
    "loss": float(loss),
    "shapes": shapes,
}))
print(shapes, float(loss))
