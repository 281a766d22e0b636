"""Regenerates the oracle fixtures in this directory.

Every value is computed by an independent reference implementation
(scikit-image, Pillow/libjpeg, SciPy, scikit-learn) and frozen as JSON or
image files; the C++ tests only read them.

    python3 tests/data/make_fixtures.py
"""
import io
import json
import os

import numpy as np
from PIL import Image
from scipy.fft import dctn
from skimage.metrics import structural_similarity
from sklearn.metrics import roc_auc_score

HERE = os.path.dirname(os.path.abspath(__file__))
rng = np.random.default_rng(20240611)


def save(name, arr):
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr.astype(np.uint8), mode).save(os.path.join(HERE, name))


def smooth_image(h, w, c):
    y, x = np.mgrid[0:h, 0:w]
    base = 128 + 60 * np.sin(x / 5.0) * np.cos(y / 7.0) + rng.normal(0, 8, (h, w))
    if c == 1:
        return np.clip(np.round(base), 0, 255).astype(np.uint8)
    chans = [base + 20 * k * np.cos((x + y) / (6.0 + k)) for k in range(3)]
    return np.clip(np.round(np.stack(chans, -1)), 0, 255).astype(np.uint8)


fixtures = {}

# Pixel metrics and SSIM (Gaussian window, sigma 1.5, population covariance).
pairs = []
for idx, (h, w, c, noise) in enumerate([(24, 20, 1, 6.0), (32, 32, 3, 12.0), (17, 29, 3, 30.0)]):
    a = smooth_image(h, w, c)
    b = np.clip(a.astype(np.int32) + np.round(rng.normal(0, noise, a.shape)).astype(np.int32), 0, 255).astype(np.uint8)
    an, bn = f"pair{idx}_a.png", f"pair{idx}_b.png"
    save(an, a)
    save(bn, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff**2))
    ssim = structural_similarity(
        a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=255,
        channel_axis=None if c == 1 else 2)
    pairs.append({"a": an, "b": bn, "mae": float(np.mean(np.abs(diff))),
                  "psnr_db": float(10 * np.log10(255.0**2 / mse)), "ssim": float(ssim)})
fixtures["pairs"] = pairs

# 256-level gray ramp written by Pillow's PNG encoder.
ramp = np.tile(np.arange(256, dtype=np.uint8), (4, 1))
save("ramp_gray.png", ramp)

# Resampling: Pillow resize (8-bit path, fixed-point weights).
src = smooth_image(23, 31, 3)
save("resize_src.png", src)
resizes = []
for kname, flt in [("lanczos3", Image.LANCZOS), ("bilinear", Image.BILINEAR), ("box", Image.BOX)]:
    for (w, h) in [(17, 12), (47, 40)]:
        out = np.asarray(Image.fromarray(src).resize((w, h), flt))
        fn = f"resize_{kname}_{w}x{h}.png"
        save(fn, out)
        resizes.append({"kernel": kname, "width": w, "height": h, "file": fn})
fixtures["resizes"] = resizes

# IJG quantization tables as produced by libjpeg through Pillow (natural order).
quant = {}
for q in [10, 50, 90, 95, 100]:
    buf = io.BytesIO()
    Image.fromarray(src).save(buf, "JPEG", quality=q)
    tables = Image.open(io.BytesIO(buf.getvalue())).quantization
    quant[str(q)] = {"luma": list(tables[0]), "chroma": list(tables[1])}
fixtures["quant_tables"] = quant

# Orthonormal 8x8 DCT-II.
block = rng.uniform(-128, 127, (8, 8))
fixtures["dct"] = {"input": block.flatten().tolist(),
                   "output": dctn(block, type=2, norm="ortho").flatten().tolist()}

# AUC with heavy ties.
labels = rng.integers(0, 2, 60)
scores = np.round(rng.normal(labels * 0.8, 1.0), 1)
fixtures["auc"] = {"labels": labels.tolist(), "scores": scores.tolist(),
                   "auc": float(roc_auc_score(labels, scores))}

with open(os.path.join(HERE, "fixtures.json"), "w") as f:
    json.dump(fixtures, f, indent=1)
print("ok")
