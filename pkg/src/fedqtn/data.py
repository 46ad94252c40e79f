"""Image datasets: loading, downscaling, splitting, client partitions, synthetic data."""
from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass
from math import floor, isqrt
from pathlib import Path

import numpy as np

from .errors import CapacityError, ContractError, DomainError, FormatError, ParseError

_FRAC_EPS = 1e-9


@dataclass(frozen=True)
class ImageSample:
    pixels: np.ndarray
    label: int
    id: str

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or min(px.shape) < 1:
            raise ContractError(f"pixels must be a non-empty H x W matrix, got shape {px.shape}")
        if np.isnan(px).any() or px.min() < 0.0 or px.max() > 1.0:
            raise DomainError(f"sample {self.id}: pixels must lie in [0, 1]")
        if self.label not in (0, 1):
            raise DomainError(f"sample {self.id}: label must be 0 or 1, got {self.label!r}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass
class Dataset:
    samples: list[ImageSample]
    name: str = "dataset"

    def __post_init__(self):
        self.samples = list(self.samples)
        shapes = {s.pixels.shape for s in self.samples}
        if len(shapes) > 1:
            raise FormatError(f"{self.name}: mixed image shapes {sorted(shapes)}")

    def __len__(self):
        return len(self.samples)

    @property
    def shape(self):
        return self.samples[0].pixels.shape if self.samples else None

    def images(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, 0, 0))
        return np.stack([s.pixels for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def label_counts(self) -> tuple[int, int]:
        y = self.labels()
        return int((y == 0).sum()), int((y == 1).sum())

    def subset(self, idx, name=None) -> "Dataset":
        return Dataset([self.samples[i] for i in idx], name or self.name)


@dataclass(frozen=True)
class PartitionSpec:
    """Either explicit ``counts`` [(n_label0, n_label1), ...] or ``fractions`` per client."""

    counts: tuple[tuple[int, int], ...] | None = None
    fractions: tuple[float, ...] | None = None
    stratified: bool = True
    seed: int = 0
    clients: tuple[str, ...] | None = None

    def __post_init__(self):
        if (self.counts is None) == (self.fractions is None):
            raise ContractError("partition spec needs exactly one of counts / fractions")
        if self.counts is not None:
            object.__setattr__(self, "counts", tuple(tuple(int(x) for x in c) for c in self.counts))
            if any(len(c) != 2 or min(c) < 0 for c in self.counts):
                raise ContractError("counts must be non-negative (n_label0, n_label1) pairs")
        else:
            fr = tuple(float(f) for f in self.fractions)
            object.__setattr__(self, "fractions", fr)
            if any(not 0.0 <= f <= 1.0 for f in fr) or abs(sum(fr) - 1.0) > _FRAC_EPS:
                raise ContractError(f"fractions must lie in [0, 1] and sum to 1, got {fr}")
        if self.clients is not None:
            object.__setattr__(self, "clients", tuple(self.clients))
            if len(self.clients) != self.n_clients or len(set(self.clients)) != len(self.clients):
                raise ContractError("client names must be unique, one per client")

    @property
    def n_clients(self) -> int:
        return len(self.counts if self.counts is not None else self.fractions)

    def client_names(self) -> list[str]:
        return list(self.clients) if self.clients else [f"H{i + 1}" for i in range(self.n_clients)]


# --- loading ------------------------------------------------------------------

_DIMS = re.compile(r"#\s*w\s*=\s*(\d+)\s+h\s*=\s*(\d+)")


def _parse_pixel(tok: str, lineno: int) -> float:
    tok = tok.strip()
    try:
        if re.fullmatch(r"[+-]?\d+", tok):
            return int(tok) / 255.0
        return float(tok)
    except ValueError:
        raise ParseError(f"bad pixel value {tok!r}", lineno) from None


def load_csv(path) -> Dataset:
    """Read ``label,p0,...`` rows. Integer pixels are 0-255, decimals are taken as-is.

    An optional first line ``# w=W h=H`` gives the image shape; otherwise the
    image is assumed square.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    width = height = None
    start = 0
    if lines and lines[0].startswith("#"):
        m = _DIMS.match(lines[0])
        if not m:
            raise ParseError("expected '# w=W h=H' comment", 1)
        width, height = int(m.group(1)), int(m.group(2))
        start = 1
    rows = list(csv.reader(lines[start:]))
    if not rows:
        raise ParseError("missing header row", start + 1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "label":
        raise ParseError("header must start with 'label'", start + 1)
    n_px = len(header) - 1
    if width is None:
        side = isqrt(n_px)
        if side * side != n_px:
            raise FormatError(f"{n_px} pixels per row is not square and no '# w= h=' line was given")
        width = height = side
    if width * height != n_px:
        raise FormatError(f"header has {n_px} pixel columns but w*h = {width * height}")

    samples = []
    for i, row in enumerate(rows[1:]):
        lineno = start + 2 + i
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n_px + 1:
            raise ParseError(f"expected {n_px} pixels, found {len(row) - 1}", lineno)
        try:
            label = int(row[0])
        except ValueError:
            raise ParseError(f"bad label {row[0]!r}", lineno) from None
        if label not in (0, 1):
            raise ParseError(f"label must be 0 or 1, got {label}", lineno)
        px = np.clip([_parse_pixel(t, lineno) for t in row[1:]], 0.0, 1.0)
        samples.append(ImageSample(px.reshape(height, width), label, f"{path.stem}:{i}"))
    return Dataset(samples, path.stem)


def save_csv(d: Dataset, path) -> None:
    """Write ``d`` in the ``load_csv`` format, pixels as full-precision decimals."""
    h, w = d.shape if d.shape else (0, 0)
    with open(path, "w", newline="") as f:
        f.write(f"# w={w} h={h}\n")
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["label"] + [f"p{i}" for i in range(h * w)])
        for s in d.samples:
            wr.writerow([s.label] + [repr(float(x)) for x in s.pixels.reshape(-1)])


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        begin = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if begin == pos:
            raise FormatError(f"{path.name}: truncated header")
        tokens.append(data[begin:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path.name}: expected P5 magic, got {tokens[0][:8]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 65536:
        raise FormatError(f"{path.name}: maxval {maxval} out of range")
    pos += 1  # single whitespace after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    raw = np.frombuffer(data, dtype=dtype, count=n, offset=pos) if len(data) - pos >= n * dtype.itemsize else None
    if raw is None:
        raise FormatError(f"{path.name}: expected {n} pixels")
    return np.clip(raw.reshape(height, width) / maxval, 0.0, 1.0)


def load_pgm_dir(directory, labels_csv) -> Dataset:
    """Binary PGM images, labelled by a ``filename,label`` CSV; ordered by filename."""
    directory = Path(directory)
    labels = {}
    with open(labels_csv, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row or row[0].strip() in ("", "filename"):
                continue
            try:
                labels[row[0].strip()] = int(row[1])
            except (IndexError, ValueError):
                raise ParseError(f"bad label row {row!r}", lineno) from None
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        warnings.warn(f"no .pgm files in {directory}", stacklevel=2)
    samples = []
    for p in files:
        if p.name not in labels:
            raise FormatError(f"{p.name} has no entry in {labels_csv}")
        samples.append(ImageSample(_read_pgm(p), labels[p.name], p.name))
    return Dataset(samples, directory.name)


# --- transforms ---------------------------------------------------------------


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row i: fraction of output cell i covered by each input cell."""
    scale = n_in / n_out
    edges = np.arange(n_out + 1) * scale
    src = np.arange(n_in)
    lo = np.maximum(edges[:-1, None], src[None, :])
    hi = np.minimum(edges[1:, None], src[None, :] + 1)
    return np.clip(hi - lo, 0.0, None) / scale


def downscale_array(images, out_h: int, out_w: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    in_h, in_w = images.shape[-2:]
    if out_h < 1 or out_w < 1:
        raise ContractError("output dimensions must be positive")
    if out_h > in_h or out_w > in_w:
        raise ContractError(f"cannot downscale {in_h}x{in_w} to larger {out_h}x{out_w}")
    if (out_h, out_w) == (in_h, in_w):
        return images.copy()
    if in_h % out_h == 0 and in_w % out_w == 0:
        fh, fw = in_h // out_h, in_w // out_w
        shape = images.shape[:-2] + (out_h, fh, out_w, fw)
        return images.reshape(shape).mean(axis=(-3, -1))
    wh, ww = _area_weights(in_h, out_h), _area_weights(in_w, out_w)
    return np.clip(wh @ images @ ww.T, 0.0, 1.0)


def downscale(img: ImageSample, out_h: int, out_w: int) -> ImageSample:
    return ImageSample(downscale_array(img.pixels, out_h, out_w), img.label, img.id)


def downscale_dataset(d: Dataset, out_h: int, out_w: int) -> Dataset:
    return Dataset([downscale(s, out_h, out_w) for s in d.samples], d.name)


# --- splitting ----------------------------------------------------------------


def _stratified_order(labels, rng) -> np.ndarray:
    """Shuffle within each label, then interleave labels by relative rank."""
    keys, order = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        keys.append((np.arange(idx.size) + 0.5) / max(idx.size, 1))
        order.append(idx)
    idx = np.concatenate(order)
    key = np.concatenate(keys)
    lab = np.concatenate([np.zeros(order[0].size), np.ones(order[1].size)])
    return idx[np.lexsort((lab, key))]


def train_val_test_split(d: Dataset, fractions=(0.70, 0.10, 0.20), seed: int = 0):
    """Stratified split; val/test sizes are floored and the remainder goes to train."""
    if len(d) == 0:
        raise ContractError("cannot split an empty dataset")
    f_train, f_val, f_test = (float(f) for f in fractions)
    if min(f_train, f_val, f_test) < 0 or abs(f_train + f_val + f_test - 1.0) > _FRAC_EPS:
        raise ContractError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    n = len(d)
    n_val = floor(f_val * n + _FRAC_EPS)
    n_test = floor(f_test * n + _FRAC_EPS)
    order = _stratified_order(d.labels(), np.random.default_rng(seed))
    val, test, train = np.split(order, [n_val, n_val + n_test])
    return (d.subset(np.sort(train), f"{d.name}-train"),
            d.subset(np.sort(val), f"{d.name}-val"),
            d.subset(np.sort(test), f"{d.name}-test"))


def _floor_shares(total: int, fractions) -> list[int]:
    shares = [floor(f * total + _FRAC_EPS) for f in fractions]
    for i in range(total - sum(shares)):
        shares[i % len(shares)] += 1
    return shares


def partition(d: Dataset, spec: PartitionSpec) -> list[Dataset]:
    """Disjoint per-client datasets, named after ``spec.client_names()``."""
    rng = np.random.default_rng(spec.seed)
    labels = d.labels()
    names = spec.client_names()
    pools = {c: np.flatnonzero(labels == c) for c in (0, 1)}
    pools = {c: idx[rng.permutation(idx.size)] for c, idx in pools.items()}

    if spec.counts is not None:
        per_label = {c: [cnt[c] for cnt in spec.counts] for c in (0, 1)}
        for c in (0, 1):
            need = 0
            for name, k in zip(names, per_label[c]):
                need += k
                if need > pools[c].size:
                    raise CapacityError(
                        f"label {c}: client {name} requests {k}, only {pools[c].size - (need - k)} left"
                    )
    elif spec.stratified:
        per_label = {c: _floor_shares(pools[c].size, spec.fractions) for c in (0, 1)}
    else:
        everything = np.arange(len(d))[rng.permutation(len(d))]
        sizes = _floor_shares(len(d), spec.fractions)
        bounds = np.cumsum([0] + sizes)
        return [d.subset(np.sort(everything[bounds[i]:bounds[i + 1]]), name) for i, name in enumerate(names)]

    out, start = [], {0: 0, 1: 0}
    for i, name in enumerate(names):
        idx = []
        for c in (0, 1):
            k = per_label[c][i]
            idx.append(pools[c][start[c]:start[c] + k])
            start[c] += k
        out.append(d.subset(np.sort(np.concatenate(idx)), name))
    return out


# --- synthetic ----------------------------------------------------------------


def synth_blobs(n: int, h: int = 8, w: int = 8, noise_sd: float = 0.0, seed: int = 0) -> Dataset:
    """Two-class band images: label 1 bright on the top half, label 0 on the bottom half.

    Bright pixels sit at 0.9, dark at 0.1, plus Gaussian noise clipped to
    [0, 1]. Labels alternate 0, 1, 0, ... so any even ``n`` is balanced.
    """
    if h < 4 or w < 4:
        raise ContractError("synthetic images need h, w >= 4")
    rng = np.random.default_rng(seed)
    top = np.full((h, w), 0.1)
    top[: h // 2] = 0.9
    bottom = top[::-1].copy()
    labels = np.arange(n) % 2
    base = np.where(labels[:, None, None] == 1, top, bottom)
    noise = rng.normal(0.0, noise_sd, size=base.shape) if noise_sd > 0 else 0.0
    imgs = np.clip(base + noise, 0.0, 1.0)
    return Dataset([ImageSample(imgs[i], int(labels[i]), f"synth-{i:06d}") for i in range(n)], "synth")
