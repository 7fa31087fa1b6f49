#!/usr/bin/env python3
"""Regenerate the committed test fixtures under crates/core/tests/fixtures.

The reference network is torchvision's ResNet-18 with every parameter and
running statistic drawn from the SplitMix64 stream documented in
crates/core/src/net/synthetic.rs. The Rust crate rebuilds the byte-identical
NNW1 archive from the same seed, so only the (small) activations are
committed. Usage:

    python3 tools/make_fixtures.py [--out crates/core/tests/fixtures]
"""

import argparse
import hashlib
import math
import os
import struct

import numpy as np
import torch
import torchvision

SEED = 2024
GAMMA = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1
IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def take_u01(self, count):
        """`count` uniforms in [0, 1): (next() >> 11) * 2^-53."""
        with np.errstate(over="ignore"):
            k = np.arange(1, count + 1, dtype=np.uint64)
            z = np.uint64(self.state) + k * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + count * GAMMA) & MASK
        return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def manifest_layout():
    """(name, dims, kind) in archive order. Mirrors synthetic.rs."""
    out = []

    def bn(prefix, c):
        for field in ("gamma", "beta", "mean", "var"):
            out.append((f"{prefix}.{field}", [c], f"bn_{field}"))

    out.append(("conv1.weight", [64, 3, 7, 7], "conv"))
    bn("bn1", 64)
    widths = [64, 128, 256, 512]
    c_in = 64
    for stage, c_out in enumerate(widths, start=1):
        for block in range(2):
            src = c_in if block == 0 else c_out
            p = f"layer{stage}.{block}"
            out.append((f"{p}.conv1.weight", [c_out, src, 3, 3], "conv"))
            bn(f"{p}.bn1", c_out)
            out.append((f"{p}.conv2.weight", [c_out, c_out, 3, 3], "conv"))
            bn(f"{p}.bn2", c_out)
            if stage >= 2 and block == 0:
                out.append((f"{p}.downsample.conv.weight", [c_out, c_in, 1, 1], "conv"))
                bn(f"{p}.downsample.bn", c_out)
        c_in = c_out
    out.append(("fc.weight", [1000, 512], "fc"))
    out.append(("fc.bias", [1000], "fc"))
    return out


def draw(rng, dims, kind):
    count = int(np.prod(dims))
    u = rng.take_u01(count)
    if kind == "conv":
        fan_in = dims[1] * dims[2] * dims[3]
        a = math.sqrt(3.0) * math.sqrt(2.0 / fan_in)
        v = (2.0 * u - 1.0) * a
    elif kind == "fc":
        a = 1.0 / math.sqrt(512.0)
        v = (2.0 * u - 1.0) * a
    elif kind == "bn_gamma":
        v = 0.5 + 0.5 * u
    elif kind == "bn_beta":
        v = (2.0 * u - 1.0) * 0.2
    elif kind == "bn_mean":
        v = (2.0 * u - 1.0) * 0.1
    elif kind == "bn_var":
        v = 0.5 + u
    else:
        raise ValueError(kind)
    return v.astype(np.float32).reshape(dims)


def synthetic_tensors(seed):
    rng = SplitMix64(seed)
    tensors = [(name, draw(rng, dims, kind)) for name, dims, kind in manifest_layout()]
    tensors.append(("meta.mean", np.array(IMAGENET_MEAN, dtype=np.float32)))
    tensors.append(("meta.std", np.array(IMAGENET_STD, dtype=np.float32)))
    return tensors


def encode_archive(tensors):
    buf = bytearray(b"NNW1")
    buf += struct.pack("<II", 1, len(tensors))
    for name, arr in tensors:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<BB", 0, arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return bytes(buf)


def load_into_torch(tensors):
    model = torchvision.models.resnet18(weights=None)
    table = dict(tensors)
    state = {}
    for key in model.state_dict():
        if key.endswith("num_batches_tracked"):
            state[key] = torch.tensor(0)
            continue
        name = key.replace("downsample.0", "downsample.conv").replace("downsample.1", "downsample.bn")
        if ".bn" in name or name.startswith("bn1") or "downsample.bn" in name:
            name = (name.replace("running_mean", "mean").replace("running_var", "var")
                    .replace(".weight", ".gamma").replace(".bias", ".beta"))
        state[key] = torch.from_numpy(table[name].copy())
    model.load_state_dict(state)
    model.eval()
    return model


# -- image-prep mirror -------------------------------------------------------

def resize_bilinear(img, out_w, out_h):
    in_h, in_w, _ = img.shape
    sx_scale = in_w / out_w
    sy_scale = in_h / out_h
    out = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    src = img.astype(np.float64)
    xs = []
    for dx in range(out_w):
        sx = (dx + 0.5) * sx_scale - 0.5
        x0f = math.floor(sx)
        fx = sx - x0f
        xs.append((min(max(x0f, 0), in_w - 1), min(max(x0f + 1, 0), in_w - 1), fx))
    for dy in range(out_h):
        sy = (dy + 0.5) * sy_scale - 0.5
        y0f = math.floor(sy)
        fy = sy - y0f
        y0 = min(max(y0f, 0), in_h - 1)
        y1 = min(max(y0f + 1, 0), in_h - 1)
        for dx, (x0, x1, fx) in enumerate(xs):
            for c in range(3):
                top = float(src[y0, x0, c]) * (1.0 - fx) + float(src[y0, x1, c]) * fx
                bottom = float(src[y1, x0, c]) * (1.0 - fx) + float(src[y1, x1, c]) * fx
                v = top * (1.0 - fy) + bottom * fy
                out[dy, dx, c] = min(max(math.floor(v + 0.5), 0), 255)
    return out


def normalize(img, mean, std):
    h, w, _ = img.shape
    t = np.zeros((3, h, w), dtype=np.float32)
    for c in range(3):
        v = img[:, :, c].astype(np.float64) / 255.0
        t[c] = ((v - float(mean[c])) / float(std[c])).astype(np.float32)
    return t


def write_ppm(path, img):
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.astype(np.uint8).tobytes())


def write_vec(path, values):
    values = np.asarray(values, dtype="<f4").ravel()
    with open(path, "wb") as f:
        f.write(b"VEC1" + struct.pack("<I", values.size) + values.tobytes())


def fixture_f1():
    w, h = 200, 150
    img = np.zeros((h, w, 3), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            img[y, x, 0] = (x * 7 + y * 3) % 256
            img[y, x, 1] = ((x ^ y) * 5) % 256
            img[y, x, 2] = ((x * x + y * y) // 37) % 256
    return img


def checkerboard4():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    for y in range(4):
        for x in range(4):
            img[y, x] = (200, 30, 90) if (x + y) % 2 == 0 else (10, 220, 140)
    return img


def ramp_cube(path):
    h, w, b = 4, 4, 10
    wavelengths = np.array([400 + 50 * i for i in range(b)], dtype="<f4")
    data = np.zeros((b, h, w), dtype="<f4")
    for k in range(b):
        for y in range(h):
            for x in range(w):
                data[k, y, x] = np.float32(0.1 * k + 0.01 * y + 0.001 * x)
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[:, : w // 2] = 1
    with open(path, "wb") as f:
        f.write(b"HCB1" + struct.pack("<III", h, w, b))
        f.write(wavelengths.tobytes())
        f.write(data.tobytes())
        f.write(b"MASK" + mask.tobytes())


def taps(model, x):
    out = {}
    with torch.no_grad():
        s = model.maxpool(model.relu(model.bn1(model.conv1(x))))
        out["stem"] = s
        s = model.layer1(s)
        out["stage1"] = s
        s = model.layer2(s)
        out["stage2"] = s
        s = model.layer3(s)
        out["stage3"] = s
        s = model.layer4(s)
        out["stage4"] = s
        out["gap"] = torch.flatten(model.avgpool(s), 1)
    return {k: v[0].numpy() for k, v in out.items()}


def sha256(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures"))
    parser.add_argument("--archive", default=None, help="also write the NNW1 archive here")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    torch.manual_seed(0)
    torch.set_num_threads(1)

    tensors = synthetic_tensors(SEED)
    archive = encode_archive(tensors)
    if args.archive:
        with open(args.archive, "wb") as f:
            f.write(archive)
    model = load_into_torch(tensors)
    mean = dict(tensors)["meta.mean"]
    std = dict(tensors)["meta.std"]

    written = []

    def emit(name):
        written.append(name)
        return os.path.join(args.out, name)

    f1 = fixture_f1()
    write_ppm(emit("f1.ppm"), f1)
    resized = resize_bilinear(f1, 224, 224)
    norm = normalize(resized, mean, std)
    write_vec(emit("f1.norm.vec"), norm)
    acts = taps(model, torch.from_numpy(norm).unsqueeze(0))
    for tap in ("gap", "stage4"):
        write_vec(emit(f"f1.{tap}.vec"), acts[tap])

    zero = taps(model, torch.zeros(1, 3, 224, 224))
    write_vec(emit("zero.gap.vec"), zero["gap"])

    write_ppm(emit("checker4.ppm"), checkerboard4())
    ramp_cube(emit("ramp4x4x10.hcb"))

    params = len(list(torchvision.models.resnet18(weights=None).named_parameters()))
    lines = [
        "source=torchvision.resnet18 synthetic-splitmix64",
        f"seed={SEED}",
        f"parameter_groups={params}",
        f"archive_sha256={hashlib.sha256(archive).hexdigest()}",
    ]
    for name in written:
        lines.append(f"fixture {name} {sha256(os.path.join(args.out, name))}")
    with open(os.path.join(args.out, "manifest.txt"), "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    print("gap stats: min %.4f max %.4f mean %.4f" % (acts["gap"].min(), acts["gap"].max(), acts["gap"].mean()))
    print("zero gap: min %.4f max %.4f" % (zero["gap"].min(), zero["gap"].max()))


if __name__ == "__main__":
    main()
