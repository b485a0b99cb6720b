"""Report persistence: delimited tables, JSON documents, graymaps, figures.

Experiments write their numbers as CSV/JSON/gnuplot data files first; the
matplotlib renderings are a convenience layer on top of the same arrays and
never the only copy of a result.
"""

import csv
import json

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = [
    "jsonify",
    "write_csv",
    "write_json",
    "write_pgm",
    "read_pgm",
    "write_histogram_data",
    "save_histogram",
    "save_histogram_grid",
    "save_trace_plot",
    "save_image_pair",
    "save_success_curve",
]


def jsonify(obj):
    """Recursively convert numpy scalars/arrays into JSON-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonify(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(np.real(obj)), "im": float(np.imag(obj))}
    return obj


def write_csv(path, header, rows):
    """One header row then the data rows; numpy values pass through str()."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
    return path


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(jsonify(doc), fh, indent=1, sort_keys=True)
    return path


def write_pgm(path, image, maxval=255):
    """ASCII portable graymap (P2).  Floats are rescaled to [0, maxval]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-d, got shape %s" % (img.shape,))
    if not np.all(np.isfinite(img)):
        raise ValueError("image has non-finite entries")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        levels = np.rint((img - lo) / (hi - lo) * maxval).astype(int)
    else:
        levels = np.zeros(img.shape, dtype=int)
    h, w = img.shape
    lines = ["P2", "%d %d" % (w, h), str(maxval)]
    for row in levels:
        lines.append(" ".join(str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_pgm(path):
    """Read an ASCII P2 graymap back as a float array in [0, 1]."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            hash_at = line.find("#")
            if hash_at >= 0:
                line = line[:hash_at]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not an ASCII P2 graymap: %s" % path)
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=np.float64)
    if data.size != w * h:
        raise ValueError("graymap has %d samples, expected %d" % (data.size, w * h))
    return data.reshape(h, w) / maxval


def write_histogram_data(path, values, bins=20, comment=""):
    """Two-column 'bin_center count' text file, ready for gnuplot."""
    values = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(values, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append("# bin_center count   (n=%d)" % values.size)
    for c, k in zip(centers, counts):
        lines.append("%.10g %d" % (c, int(k)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def save_histogram(path, values, bins=20, title="", xlabel="error", log_x=False):
    values = np.asarray(values, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    if log_x:
        pos = values[values > 0]
        lo = max(pos.min(), 1e-17) if pos.size else 1e-17
        hi = max(values.max(), lo * 10)
        edges = np.logspace(np.floor(np.log10(lo)), np.ceil(np.log10(hi)), bins + 1)
        ax.hist(np.clip(values, lo, None), bins=edges)
        ax.set_xscale("log")
    else:
        ax.hist(values, bins=bins)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_histogram_grid(path, named_values, bins=20, title="", xlabel="error", log_x=False):
    """One subplot per (name, values) pair, shared x-range for comparability."""
    named_values = list(named_values)
    cols = min(len(named_values), 2)
    rows = (len(named_values) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.6 * cols, 3.0 * rows), squeeze=False)
    allv = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in named_values])
    if log_x:
        pos = allv[allv > 0]
        lo = max(pos.min(), 1e-17) if pos.size else 1e-17
        hi = max(allv.max(), lo * 10)
        edges = np.logspace(np.floor(np.log10(lo)), np.ceil(np.log10(hi)), bins + 1)
    else:
        edges = np.histogram_bin_edges(allv, bins=bins)
    for k, (name, vals) in enumerate(named_values):
        ax = axes[k // cols][k % cols]
        vals = np.asarray(vals, dtype=np.float64)
        if log_x:
            vals = np.clip(vals, edges[0], None)
            ax.set_xscale("log")
        ax.hist(vals, bins=edges)
        ax.set_title(name, fontsize=10)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
    for k in range(len(named_values), rows * cols):
        axes[k // cols][k % cols].set_axis_off()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_trace_plot(path, traces, labels=None, title="", ylabel="residual", log_y=True):
    """Overlay per-iteration traces; handy for convergence/failure pictures."""
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for k, tr in enumerate(traces):
        tr = np.asarray(tr, dtype=np.float64)
        lab = labels[k] if labels else None
        ax.plot(np.arange(1, tr.size + 1), tr, lw=1.0, label=lab)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    if labels:
        ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_image_pair(path, left, right, left_title="reference", right_title="reconstruction"):
    fig, axes = plt.subplots(1, 2, figsize=(6.4, 3.2))
    for ax, img, name in zip(axes, (left, right), (left_title, right_title)):
        ax.imshow(np.asarray(img, dtype=np.float64), cmap="gray")
        ax.set_title(name, fontsize=10)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_success_curve(path, x, series, labels, title="", xlabel="n", ylabel="successes"):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for vals, lab in zip(series, labels):
        ax.plot(x, vals, marker="o", lw=1.2, label=lab)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
