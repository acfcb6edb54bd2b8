"""Benchmark harness: data I/O, corruption, metrics, and experiment sweeps.

Reproducibility: every random draw in this module goes through
``numpy.random.default_rng(seed)`` (the PCG64 generator), positions for
salt-and-pepper corruption are sampled by an in-repo partial
Fisher-Yates shuffle, and draw order is fixed, so equal seeds give
bit-identical outputs on any platform running the same numpy release.
OS randomness is never consulted.
"""

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from concurrent.futures import ThreadPoolExecutor
from itertools import product

import numpy as np

from .baselines import truncated_svd
from .core import FactorPair, as_matrix, normalize_variant
from .factorizer import default_image_hyper, fit, fit_grown, init_factors, reconstruct

__all__ = [
    "ParseError",
    "PgmHeaderError",
    "PgmMaxvalError",
    "PgmPayloadError",
    "CsvParseError",
    "load_pgm",
    "save_pgm",
    "load_csv_matrix",
    "save_csv_matrix",
    "load_matrix",
    "CorruptionSpec",
    "corrupt_salt_pepper",
    "relative_mae",
    "count_groups",
    "sparsity_fraction",
    "synth_lowrank",
    "MetricsRecord",
    "SynthSpec",
    "SweepConfig",
    "run_sweep",
    "SWEEP_CSV_COLUMNS",
    "write_sweep_csv",
    "summarize_records",
    "write_sweep_summary",
]


class ParseError(ValueError):
    """A data file could not be parsed."""


class PgmHeaderError(ParseError):
    """Malformed PGM header (bad magic, missing or non-numeric fields)."""


class PgmMaxvalError(ParseError):
    """PGM maxval outside the supported 1..255 range."""


class PgmPayloadError(ParseError):
    """PGM pixel payload truncated, malformed, or out of range."""


class CsvParseError(ParseError):
    """Ragged rows or non-numeric cells in a CSV matrix."""


_WHITESPACE = b" \t\r\n\x0b\x0c"


def _pgm_tokens(data):
    """First four header tokens (magic, width, height, maxval) and the
    offset just past the single whitespace byte that ends the header."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise PgmHeaderError("unexpected end of file inside PGM header")
        ch = data[pos : pos + 1]
        if ch in (b"#",):
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmHeaderError("unterminated comment in PGM header")
            pos = nl + 1
            continue
        if ch in _WHITESPACE:
            pos += 1
            continue
        end = pos
        while end < len(data) and data[end : end + 1] not in _WHITESPACE:
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PgmHeaderError("PGM header not terminated by whitespace")
    return tokens, pos + 1


def load_pgm(path):
    """Read a PGM image (ASCII ``P2`` or binary ``P5``, maxval <= 255).

    Returns a float64 matrix of shape (height, width) with values in
    [0, maxval].
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PgmHeaderError(f"unsupported PGM magic {magic!r} (expected P2 or P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PgmHeaderError("non-numeric width/height/maxval in PGM header") from None
    if width < 1 or height < 1:
        raise PgmHeaderError(f"non-positive PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise PgmMaxvalError(f"unsupported PGM maxval {maxval} (need 1..255)")
    count = width * height
    if magic == b"P5":
        payload = data[offset : offset + count]
        if len(payload) < count:
            raise PgmPayloadError(
                f"truncated P5 payload: expected {count} bytes, found {len(payload)}"
            )
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        fields = data[offset:].split()
        if len(fields) < count:
            raise PgmPayloadError(
                f"truncated P2 payload: expected {count} values, found {len(fields)}"
            )
        if len(fields) > count:
            raise PgmPayloadError(
                f"trailing data in P2 payload: expected {count} values, found {len(fields)}"
            )
        try:
            pixels = np.array([int(f) for f in fields], dtype=np.float64)
        except ValueError:
            raise PgmPayloadError("non-numeric value in P2 payload") from None
    if pixels.max(initial=0.0) > maxval or pixels.min(initial=0.0) < 0:
        raise PgmPayloadError(f"pixel value outside [0, {maxval}]")
    return pixels.reshape(height, width)


def save_pgm(path, matrix, binary=True):
    """Write a matrix as PGM, clipping to [0, 255] and rounding to integers."""
    m = as_matrix(matrix, "matrix")
    pixels = np.clip(np.rint(m), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(b"P5\n%d %d\n255\n" % (width, height))
            fh.write(pixels.tobytes())
        else:
            fh.write(b"P2\n%d %d\n255\n" % (width, height))
            for row in pixels:
                fh.write((" ".join(str(v) for v in row) + "\n").encode("ascii"))


def load_csv_matrix(path):
    """Read a comma-separated matrix of decimal floats (no header row)."""
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise CsvParseError(
                    f"ragged row on line {line_no}: {len(cells)} cells, expected {width}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise CsvParseError(f"non-numeric cell on line {line_no}") from None
    if not rows:
        raise CsvParseError("no data rows in CSV file")
    m = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise CsvParseError("non-finite value in CSV file")
    return m


def save_csv_matrix(path, matrix):
    """Write a matrix as comma-separated decimals; round-trips to full precision."""
    m = as_matrix(matrix, "matrix")
    with open(path, "w", encoding="ascii") as fh:
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix(path):
    """Load a matrix by extension: .pgm/.pnm as PGM, anything else as CSV."""
    if str(path).lower().endswith((".pgm", ".pnm")):
        return load_pgm(path)
    return load_csv_matrix(path)


@dataclass(frozen=True)
class CorruptionSpec:
    """Salt-and-pepper corruption: ``ratio`` of entries set to low/high."""

    ratio: float
    seed: int
    low: float = 0.0
    high: float = 255.0

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def _sample_positions(rng, total, count):
    # partial Fisher-Yates: count distinct draws from range(total), order fixed
    idx = np.arange(total)
    if count == 0:
        return idx[:0]
    highs = total - np.arange(count)
    offsets = rng.integers(0, highs)
    for i in range(count):
        j = i + int(offsets[i])
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:count]


def corrupt_salt_pepper(Y, spec):
    """Replace floor(ratio * d * n) distinct entries by the low or high value.

    Each corrupted entry becomes ``spec.low`` or ``spec.high`` with equal
    probability.  Positions are drawn without replacement by a partial
    Fisher-Yates shuffle driven by PCG64(seed), then the low/high coins
    are drawn, so equal seeds reproduce the exact corruption pattern.
    """
    Y = as_matrix(Y, "Y")
    total = Y.size
    # floor of the intended real product; tolerate float representation of ratios
    count = int(math.floor(spec.ratio * total + 1e-9))
    out = Y.copy()
    if count == 0:
        return out
    rng = np.random.default_rng(spec.seed)
    positions = _sample_positions(rng, total, count)
    coins = rng.integers(0, 2, size=count)
    out.ravel()[positions] = np.where(coins == 1, spec.high, spec.low)
    return out


def relative_mae(y_ref, y_hat):
    """Entrywise L1 error of y_hat relative to the L1 mass of y_ref.

    The reference must be the clean matrix even when the factorization
    ran on a corrupted copy; that is what makes the metric a recovery
    error.
    """
    y_ref = as_matrix(y_ref, "y_ref")
    y_hat = as_matrix(y_hat, "y_hat")
    if y_ref.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y_ref.shape} vs {y_hat.shape}")
    denom = float(np.abs(y_ref).sum())
    if denom <= 0.0:
        raise ValueError("reference matrix has zero L1 norm")
    return float(np.abs(y_ref - y_hat).sum()) / denom


def _component_count(vec, tau):
    # union-find over coordinates, edges where the gap is inside tau
    r = vec.shape[0]
    parent = list(range(r))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for l in range(r - 1):
        for q in range(l + 1, r):
            if abs(vec[l] - vec[q]) < tau:
                ra, rb = find(l), find(q)
                if ra != rb:
                    parent[rb] = ra
    return sum(1 for a in range(r) if find(a) == a)


def count_groups(factors, tau_group):
    """Mean number of value clusters per factor vector.

    For every row of u and of v, coordinates closer than ``tau_group``
    are linked (transitively) and the connected components are counted;
    the mean over all d + n rows is returned.  Lies in [1, r].
    """
    if not tau_group > 0:
        raise ValueError(f"tau_group must be > 0, got {tau_group}")
    rows = list(factors.u) + list(factors.v)
    counts = [_component_count(row, tau_group) for row in rows]
    return float(np.mean(counts))


def sparsity_fraction(factors, zero_tol=1e-6):
    """Fraction of factor entries within ``zero_tol`` of zero."""
    if zero_tol < 0:
        raise ValueError(f"zero_tol must be >= 0, got {zero_tol}")
    stacked = np.concatenate([factors.u.ravel(), factors.v.ravel()])
    return float(np.mean(np.abs(stacked) <= zero_tol))


def synth_lowrank(d, n, r, groups, zero_frac=0.25, jitter=0.0, seed=0, level_low=0.2):
    """Exact rank-r pixel-scale matrix with grouped, sparse factors.

    Every factor row takes its nonzero values from ``groups`` shared
    levels (each level used at least once per row, so rows carry exactly
    ``groups`` distinct nonzero values when ``zero_frac`` is 0), a
    ``zero_frac`` fraction of coordinates is exactly 0, and ``jitter``
    adds within-group noise to the nonzero entries.  ``level_low`` sets
    the smallest level as a fraction of the largest; the default keeps
    the levels high-contrast, like face images on dark backgrounds.
    The factors are rescaled so the product lands in [0, 250]; zeros
    stay exact and the product stays exactly rank <= r.

    Returns ``(Y_clean, FactorPair)`` with the ground-truth factors.
    """
    if not (d >= 1 and n >= 1 and 1 <= r <= min(d, n)):
        raise ValueError(f"invalid sizes d={d}, n={n}, r={r}")
    if not 1 <= groups <= r:
        raise ValueError(f"groups must be in [1, r], got {groups}")
    if not 0.0 <= zero_frac <= 1.0:
        raise ValueError(f"zero_frac must be in [0, 1], got {zero_frac}")
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")
    if not 0 < level_low <= 1:
        raise ValueError(f"level_low must be in (0, 1], got {level_low}")
    rng = np.random.default_rng(seed)
    top = np.sqrt(235.0 / r)
    if groups == 1:
        levels = np.array([top])
    else:
        levels = top * np.linspace(level_low, 1.0, groups)

    def draw_rows(count):
        rows = np.empty((count, r))
        for i in range(count):
            perm = rng.permutation(r)
            assignment = np.empty(r, dtype=np.int64)
            assignment[perm[:groups]] = np.arange(groups)
            if r > groups:
                assignment[perm[groups:]] = rng.integers(0, groups, size=r - groups)
            vals = levels[assignment]
            if jitter > 0:
                vals = np.maximum(vals + rng.normal(0.0, jitter, size=r), 0.0)
            if zero_frac > 0:
                vals = np.where(rng.random(r) < zero_frac, 0.0, vals)
            rows[i] = vals
        return rows

    u = draw_rows(d)
    v = draw_rows(n)
    y = u @ v.T
    peak = float(y.max())
    if peak > 0:
        root = np.sqrt(250.0 / peak)
        u *= root
        v *= root
        y = u @ v.T
    return y, FactorPair(u, v)


@dataclass
class MetricsRecord:
    """One sweep cell: identifiers, recovery metrics, and bookkeeping.

    ``relative_mae`` is measured against the clean reference matrix.
    A non-empty ``error`` marks a failed cell; its metric fields are NaN.
    """

    variant: str
    rank: int
    corruption_ratio: float
    seed: int
    relative_mae: float = float("nan")
    groups_mean: float = float("nan")
    sparsity_fraction: float = float("nan")
    iterations: int = 0
    runtime_seconds: float = 0.0
    error: str = ""


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic input used when no file is given."""

    d: int = 64
    n: int = 64
    rank: int = 4
    groups: int = 2
    zero_frac: float = 0.25
    jitter: float = 0.0
    seed: int = 7
    level_low: float = 0.2


@dataclass
class SweepConfig:
    """Grid of sweep settings; cells run over the full Cartesian product.

    ``seeds`` drive the corruption pattern per cell (default: 5 seeds).
    ``input_path`` selects a PGM/CSV file; otherwise ``synth`` is used.
    ``hyper_overrides`` are forwarded to the hyperparameter recipe.
    """

    variants: tuple = ("grmf", "tsvd")
    ranks: tuple = (4,)
    ratios: tuple = (0.0, 0.5)
    seeds: tuple = (0, 1, 2, 3, 4)
    input_path: str = ""
    synth: SynthSpec = field(default_factory=SynthSpec)
    init: str = "svd"
    init_seed: int = 0
    hyper_overrides: dict = field(default_factory=dict)
    zero_tol: float = 1e-6
    group_tau: float = 0.0
    workers: int = 1


# Column order of the sweep CSV (documented contract; runtime is summary-only
# so that equal configs reproduce the CSV bit for bit).
SWEEP_CSV_COLUMNS = (
    "variant",
    "rank",
    "corruption_ratio",
    "seed",
    "relative_mae",
    "groups_mean",
    "sparsity_fraction",
    "iterations",
    "error",
)

_TSVD = "tsvd"


def _sweep_variants(config):
    out = []
    for name in config.variants:
        canon = str(name).strip().lower().replace("_", "-")
        out.append(canon if canon == _TSVD else normalize_variant(name))
    return out


def _run_cell(y_clean, variant, rank, ratio, seed, config):
    import time

    record = MetricsRecord(variant=variant, rank=rank, corruption_ratio=ratio, seed=seed)
    tic = time.perf_counter()
    try:
        y_in = corrupt_salt_pepper(y_clean, CorruptionSpec(ratio=ratio, seed=seed))
        group_tau = config.group_tau
        if variant == _TSVD:
            res = truncated_svd(y_in, rank)
            root = np.sqrt(res.singular_values)
            factors = FactorPair(res.left * root, res.right * root)
            recon = res.reconstruct()
            iterations = 0
            if group_tau <= 0:
                group_tau = default_image_hyper(y_in).tau2
        else:
            hyper = default_image_hyper(y_in, variant, **config.hyper_overrides)
            if config.init == "grow":
                factors, trace = fit_grown(y_in, rank, hyper, seed=config.init_seed)
            else:
                start = init_factors(y_in, rank, config.init, seed=config.init_seed)
                factors, trace = fit(y_in, rank, hyper, init=start)
            recon = reconstruct(factors)
            iterations = trace.iterations
            if group_tau <= 0:
                group_tau = hyper.tau2
        record.relative_mae = relative_mae(y_clean, recon)
        record.groups_mean = count_groups(factors, group_tau)
        record.sparsity_fraction = sparsity_fraction(factors, config.zero_tol)
        record.iterations = iterations
    except Exception as err:  # record the failure, keep sweeping
        record.error = f"{type(err).__name__}: {err}"
    record.runtime_seconds = time.perf_counter() - tic
    return record


def run_sweep(config, csv_path=None, summary_path=None):
    """Run every (variant, rank, ratio, seed) cell and collect records.

    Failed cells carry their error message and NaN metrics; the sweep
    always completes.  When paths are given, the records are written as
    CSV (see ``SWEEP_CSV_COLUMNS``) and a JSON summary with mean/std per
    cell group.
    """
    if config.input_path:
        y_clean = load_matrix(config.input_path)
    else:
        s = config.synth
        y_clean, _ = synth_lowrank(
            s.d,
            s.n,
            s.rank,
            s.groups,
            zero_frac=s.zero_frac,
            jitter=s.jitter,
            seed=s.seed,
            level_low=s.level_low,
        )
    cells = list(
        product(_sweep_variants(config), config.ranks, config.ratios, config.seeds)
    )

    def run(cell):
        variant, rank, ratio, seed = cell
        return _run_cell(y_clean, variant, int(rank), float(ratio), int(seed), config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(run, cells))
    else:
        records = [run(cell) for cell in cells]
    if csv_path:
        write_sweep_csv(records, csv_path)
    if summary_path:
        write_sweep_summary(records, summary_path)
    return records


def _fmt(value):
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.17g}"
    return str(value)


def write_sweep_csv(records, path):
    """Write records in ``SWEEP_CSV_COLUMNS`` order (deterministic bytes)."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        for rec in records:
            row = asdict(rec)
            writer.writerow([_fmt(row[col]) for col in SWEEP_CSV_COLUMNS])


def summarize_records(records):
    """Mean and standard deviation of the metrics per (variant, rank, ratio)."""
    groups = {}
    for rec in records:
        key = (rec.variant, rec.rank, rec.corruption_ratio)
        groups.setdefault(key, []).append(rec)
    summary = {}
    for (variant, rank, ratio), recs in sorted(groups.items()):
        ok = [r for r in recs if not r.error]
        cell = {
            "cells": len(recs),
            "failed": len(recs) - len(ok),
            "runtime_seconds_mean": float(np.mean([r.runtime_seconds for r in recs])),
        }
        for name in ("relative_mae", "groups_mean", "sparsity_fraction"):
            values = np.array([getattr(r, name) for r in ok], dtype=np.float64)
            if values.size:
                cell[f"{name}_mean"] = float(values.mean())
                cell[f"{name}_std"] = float(values.std(ddof=1)) if values.size > 1 else 0.0
        summary[f"{variant}|rank={rank}|ratio={ratio:g}"] = cell
    return summary


def write_sweep_summary(records, path):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(summarize_records(records), fh, indent=2, sort_keys=True)
        fh.write("\n")
