"""Binary phase masks: synthesis, PGM input/output and conversion to tensor
fields.

A mask is stored in raster orientation, ``labels[row, col]`` with row 0 at
the top.  Columns run along x.  Label ``True`` marks the lipid phase
(phase 2, dark pixels), ``False`` the aqueous phase.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MaskFormatError
from .grid import StructuredGrid, TensorField
from .tensors import sym_tensor


@dataclass
class PhaseMask:
    labels: np.ndarray
    pixel_size: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ValueError("mask must be a non-empty 2D raster")
        self.labels = labels.astype(bool)
        if not self.pixel_size > 0:
            raise ValueError("pixel size must be positive")

    @property
    def shape(self):
        return self.labels.shape

    @property
    def lipid_fraction(self):
        return float(self.labels.mean())

    def cell_labels(self):
        """Labels indexed ``[ix, iy]`` with ``iy`` increasing upwards."""
        return self.labels[::-1, :].T


@dataclass(frozen=True)
class SynthLayerSpec:
    """Layered lipid/aqueous raster with layers normal to x.

    ``wobble`` is the sinusoidal lateral displacement amplitude as a
    fraction of the layer pitch; ``gaps`` is the expected number of breaks
    per layer, each ``gap_length`` rows long.
    """

    p2: float
    layers: int
    nx: int
    ny: int
    wobble: float = 0.0
    gaps: float = 0.0
    gap_length: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p2 < 1.0:
            raise ValueError("p2 must lie in (0, 1)")
        if self.layers < 1 or self.nx < 1 or self.ny < 1:
            raise ValueError("layers and resolution must be positive")
        if self.wobble < 0 or self.gaps < 0 or self.gap_length < 1:
            raise ValueError("wobble and gaps must be non-negative")


def _split(total, parts):
    """Integer split of ``total`` into ``parts`` near-equal pieces."""
    edges = np.round(np.linspace(0, total, parts + 1)).astype(int)
    return np.diff(edges), edges[:-1]


def synth_layered_mask(spec: SynthLayerSpec, pixel_size: float = 1.0) -> PhaseMask:
    """Layered mask whose lipid fraction is within half a pixel column of
    ``p2`` in every row (and overall, gaps included)."""
    nx, ny, n = spec.nx, spec.ny, spec.layers
    lipid = int(round(spec.p2 * nx))
    if lipid < n or nx - lipid < n:
        raise ValueError(f"{nx} pixels along x cannot hold {n} layers at p2={spec.p2}")
    rng = np.random.default_rng(spec.seed)
    widths, _ = _split(lipid, n)
    pitches, starts = _split(nx, n)
    rows = np.arange(ny)
    labels = np.zeros((ny, nx), dtype=bool)
    phase = rng.uniform(0.0, 2.0 * math.pi, n) if spec.wobble > 0 else np.zeros(n)
    for k in range(n):
        offset = (pitches[k] - widths[k]) // 2
        shift = np.round(spec.wobble * pitches[k]
                         * np.sin(2.0 * math.pi * rows / ny + phase[k])).astype(int)
        for w in range(widths[k]):
            labels[rows, (starts[k] + offset + w + shift) % nx] = True
    if spec.gaps > 0:
        _cut_gaps(labels, spec, rng)
    return PhaseMask(labels, pixel_size,
                     {"p2_target": spec.p2, "layers": n, "seed": spec.seed})


def _cut_gaps(labels, spec, rng):
    """Open short circuits through layers, re-depositing the removed lipid
    on the flanks of the same row so the row fraction is unchanged."""
    ny, nx = labels.shape
    count = rng.poisson(spec.gaps * spec.layers)
    for _ in range(count):
        row0 = int(rng.integers(ny))
        col = int(rng.integers(nx))
        for row in range(row0, min(row0 + spec.gap_length, ny)):
            line = labels[row]
            lip = np.flatnonzero(line)
            if lip.size == 0:
                continue
            # the stripe segment nearest to ``col``
            c = lip[np.argmin(np.abs(lip - col))]
            seg = [c]
            while line[(seg[-1] + 1) % nx] and len(seg) < nx:
                seg.append((seg[-1] + 1) % nx)
            while line[(seg[0] - 1) % nx] and len(seg) < nx:
                seg.insert(0, (seg[0] - 1) % nx)
            line[seg] = False
            free = np.flatnonzero(~line)
            free = free[~np.isin(free, seg)]
            if free.size < len(seg):
                line[seg] = True
                continue
            line[rng.choice(free, len(seg), replace=False)] = True


def ingest_mask(mask: PhaseMask, d1, d2, partition_coefficient=1.0) -> TensorField:
    """One grid cell per pixel.  Lipid cells get ``d2 / K_p`` and capacity
    ``1 / K_p``; aqueous cells get ``d1`` and capacity 1.  Scalars stand for
    isotropic tensors."""
    kp = partition_coefficient
    if not kp > 0:
        raise ValueError("partition coefficient must be positive")
    d1, d2 = (sym_tensor(d * np.eye(2) if np.ndim(d) == 0 else d) for d in (d1, d2))
    d2 = d2 / kp
    if d1.shape != (2, 2) or d2.shape != (2, 2):
        raise ValueError("mask ingestion needs 2x2 phase tensors")
    cells = mask.cell_labels()
    grid = StructuredGrid((cells.shape[0] * mask.pixel_size, cells.shape[1] * mask.pixel_size),
                          cells.shape)
    tensors = np.where(cells[..., None, None], d2, d1)
    sigma = np.where(cells, 1.0 / kp, 1.0)
    return TensorField(grid, tensors, sigma=sigma)


def layer_profile(mask: PhaseMask, d1_normal, d2_normal, partition_coefficient=1.0):
    """Harmonic-mean reference along x for a stripe mask: every column is
    one segment with the phase of its majority."""
    cols = mask.labels.mean(axis=0) >= 0.5
    d2n = d2_normal / partition_coefficient
    return [(mask.pixel_size, d2n if c else d1_normal) for c in cols]


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


def _header(data):
    """Parse a PGM header; returns (magic, width, height, maxval, offset)."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise MaskFormatError("not a PGM file (expected P2 or P5 magic)", 0)
    pos = 2
    fields, starts = [], []
    for name in ("width", "height", "maxval"):
        m = _TOKEN.match(data, pos)
        pos = m.end()
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise MaskFormatError(f"expected integer {name}", start)
        fields.append(int(data[start:pos]))
        starts.append(start)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MaskFormatError("empty raster", starts[0] if width < 1 else starts[1])
    if not 0 < maxval < 256:
        raise MaskFormatError(f"only 8-bit PGM is supported (maxval {maxval})", starts[2])
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MaskFormatError("missing whitespace after header", pos)
    return data[:2], width, height, maxval, pos + 1


def read_pgm(path):
    """Read an 8-bit plain (P2) or binary (P5) PGM into ``(pixels, maxval)``."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, pos = _header(data)
    count = width * height
    if magic == b"P5":
        if len(data) - pos < count:
            raise MaskFormatError(f"raster truncated: need {count} bytes", len(data))
        pixels = np.frombuffer(data, np.uint8, count, pos).astype(int)
    else:
        values = []
        for m in re.finditer(rb"#[^\n]*|\S+", data[pos:]):
            tok = m.group()
            if tok.startswith(b"#"):
                continue
            if not tok.isdigit():
                raise MaskFormatError(f"bad pixel value {tok[:16]!r}", pos + m.start())
            values.append(int(tok))
        if len(values) < count:
            raise MaskFormatError(f"raster truncated: {len(values)} of {count} values", len(data))
        pixels = np.array(values[:count])
    if pixels.max() > maxval:
        raise MaskFormatError(f"pixel value exceeds maxval {maxval}", pos)
    return pixels.reshape(height, width), maxval


def file_mask_reader(path, threshold=None, pixel_size=1.0) -> PhaseMask:
    """Load a grayscale PGM as a phase mask.

    Pixels darker than ``threshold`` (default ``maxval / 2``) are lipid.
    Without an explicit threshold, grey levels other than 0 and ``maxval``
    are reported in ``meta["warnings"]``.
    """
    pixels, maxval = read_pgm(path)
    meta = {"source": str(path), "maxval": maxval, "warnings": []}
    if threshold is None:
        threshold = maxval / 2.0
        grey = np.count_nonzero((pixels != 0) & (pixels != maxval))
        if grey:
            meta["warnings"].append(
                f"{grey} non-binary pixels thresholded at midpoint {threshold:g}")
    meta["threshold"] = threshold
    return PhaseMask(pixels < threshold, pixel_size, meta)


def write_pgm(path, mask: PhaseMask, binary=True):
    """Write a mask as 8-bit PGM: lipid black (0), aqueous white (255)."""
    pixels = np.where(mask.labels, 0, 255).astype(np.uint8)
    h, w = pixels.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())
    else:
        lines = [" ".join(str(v) for v in row) for row in pixels]
        Path(path).write_text(f"P2\n{w} {h}\n255\n" + "\n".join(lines) + "\n")
