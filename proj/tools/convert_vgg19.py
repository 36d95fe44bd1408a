# Copyright 2026 The warpsynth Authors
# SPDX-License-Identifier: Apache-2.0
"""Convert torchvision VGG-19 weights into a warpsynth tensor archive.

    python3 tools/convert_vgg19.py vgg19-dcbb9e9d.pth vgg19.wsckpt

The input is a torchvision state dict (keys "features.N.weight"). The 16
convolutions up to relu5_4 are written as conv0..conv15 in float32. The
printed checksum goes into model.backbone_checksum.
"""

import argparse
import json
import struct
import sys

import numpy as np

MAGIC = b"WSCKPT01"
NUM_CONVS = 16


def fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def conv_tensors(state):
    keys = sorted({int(k.split(".")[1]) for k in state if k.startswith("features.") and k.endswith(".weight")})
    if len(keys) < NUM_CONVS:
        sys.exit(f"expected at least {NUM_CONVS} convolutions, found {len(keys)}")
    out = []
    for i, idx in enumerate(keys[:NUM_CONVS]):
        w = np.asarray(state[f"features.{idx}.weight"], dtype=np.float32)
        b = np.asarray(state[f"features.{idx}.bias"], dtype=np.float32)
        out.append((f"conv{i}.weight", w))
        out.append((f"conv{i}.bias", b.reshape(1, -1, 1, 1)))
    return out


def write_archive(path, tensors):
    header = {"tensors": [], "meta": {"source": "torchvision vgg19"}}
    payload = bytearray()
    for name, t in tensors:
        data = np.ascontiguousarray(t, dtype="<f4").tobytes()
        header["tensors"].append(
            {"name": name, "shape": list(t.shape), "dtype": "f32", "offset": len(payload), "bytes": len(data)}
        )
        payload += data
    text = json.dumps(header, separators=(",", ":")).encode()
    blob = MAGIC + struct.pack("<QQ", 0, len(text)) + text + bytes(payload)
    with open(path, "wb") as f:
        f.write(blob)
    return blob


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("state_dict", help="torchvision VGG-19 .pth file")
    parser.add_argument("output", help="archive to write")
    args = parser.parse_args()

    import torch

    state = torch.load(args.state_dict, map_location="cpu")
    state = {k: v.numpy() for k, v in state.items()}
    blob = write_archive(args.output, conv_tensors(state))
    print(f"wrote {args.output}")
    print(f"checksum {fnv1a(blob):016x}")


if __name__ == "__main__":
    main()
