#!/usr/bin/env python3
"""Convert a DINO ViT checkpoint (.pth) into the ucos weights format.

The output is a little-endian binary file: an 8-byte magic, a uint32
length-prefixed JSON header describing the architecture and the tensor
table, then the float32 payload.

Example:
    python3 tools/convert_dino_weights.py \
        --input dino_deitsmall8_pretrain.pth \
        --arch vit_small_8 \
        --output weights/vit_small_8.vitw
"""

import argparse
import json
import struct
import sys

ARCHS = {
    "vit_small_8": dict(patch_size=8, embed_dim=384, depth=12, num_heads=6,
                        mlp_ratio=4.0, base_grid=28),
    "vit_base_8": dict(patch_size=8, embed_dim=768, depth=12, num_heads=12,
                       mlp_ratio=4.0, base_grid=28),
}

MAGIC = b"UVITW001"
PIXEL_MEAN = [0.485, 0.456, 0.406]
PIXEL_STD = [0.229, 0.224, 0.225]


def flatten_state_dict(state):
    # DINO checkpoints nest the model under 'teacher'/'student' or
    # 'state_dict'; prefer the teacher weights.
    for key in ("teacher", "model", "state_dict"):
        if key in state and isinstance(state[key], dict):
            state = state[key]
            break
    return {k.replace("module.", "").replace("backbone.", ""): v for k, v in state.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", required=True)
    ap.add_argument("--arch", required=True, choices=sorted(ARCHS))
    ap.add_argument("--output", required=True)
    args = ap.parse_args()

    import numpy as np
    import torch

    cfg = ARCHS[args.arch]
    d = cfg["embed_dim"]
    p = cfg["patch_size"]
    m = int(d * cfg["mlp_ratio"])
    g = cfg["base_grid"]

    state = flatten_state_dict(torch.load(args.input, map_location="cpu"))

    def grab(name, shape, reshape=None):
        if name not in state:
            sys.exit(f"missing tensor in checkpoint: {name}")
        t = state[name].float().numpy()
        if reshape is not None:
            t = t.reshape(reshape)
        if list(t.shape) != list(shape):
            sys.exit(f"{name}: expected shape {shape}, got {list(t.shape)}")
        return np.ascontiguousarray(t, dtype="<f4")

    tensors = {}
    tensors["patch_embed.weight"] = grab("patch_embed.proj.weight", [d, 3 * p * p],
                                         reshape=(d, 3 * p * p))
    tensors["patch_embed.bias"] = grab("patch_embed.proj.bias", [d])
    tensors["cls_token"] = grab("cls_token", [d], reshape=(d,))
    tensors["pos_embed"] = grab("pos_embed", [1 + g * g, d], reshape=(1 + g * g, d))
    for i in range(cfg["depth"]):
        src = f"blocks.{i}."
        dst = f"blocks.{i}."
        tensors[dst + "norm1.weight"] = grab(src + "norm1.weight", [d])
        tensors[dst + "norm1.bias"] = grab(src + "norm1.bias", [d])
        tensors[dst + "attn.qkv.weight"] = grab(src + "attn.qkv.weight", [3 * d, d])
        tensors[dst + "attn.qkv.bias"] = grab(src + "attn.qkv.bias", [3 * d])
        tensors[dst + "attn.proj.weight"] = grab(src + "attn.proj.weight", [d, d])
        tensors[dst + "attn.proj.bias"] = grab(src + "attn.proj.bias", [d])
        tensors[dst + "norm2.weight"] = grab(src + "norm2.weight", [d])
        tensors[dst + "norm2.bias"] = grab(src + "norm2.bias", [d])
        tensors[dst + "mlp.fc1.weight"] = grab(src + "mlp.fc1.weight", [m, d])
        tensors[dst + "mlp.fc1.bias"] = grab(src + "mlp.fc1.bias", [m])
        tensors[dst + "mlp.fc2.weight"] = grab(src + "mlp.fc2.weight", [d, m])
        tensors[dst + "mlp.fc2.bias"] = grab(src + "mlp.fc2.bias", [d])

    # Write in sorted-name order (the reader indexes by offset, the writer
    # convention just keeps files reproducible).
    names = sorted(tensors)
    table = []
    offset = 0
    for name in names:
        t = tensors[name]
        table.append({"name": name, "shape": list(t.shape), "offset": offset})
        offset += t.nbytes

    header = {
        "arch": args.arch,
        "patch_size": p,
        "embed_dim": d,
        "depth": cfg["depth"],
        "num_heads": cfg["num_heads"],
        "mlp_ratio": cfg["mlp_ratio"],
        "base_grid": g,
        "pixel_mean": PIXEL_MEAN,
        "pixel_std": PIXEL_STD,
        "tensors": table,
    }
    blob = json.dumps(header).encode()

    with open(args.output, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", len(blob)))
        out.write(blob)
        for name in names:
            out.write(tensors[name].tobytes())
    print(f"wrote {args.output}: {len(names)} tensors, {offset / 1e6:.1f} MB payload")


if __name__ == "__main__":
    main()
