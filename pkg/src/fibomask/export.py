"""Byte-reproducible writers: PBM (P1) mask bitmaps, coordinate CSV, JSON.

All writes go through a temp file in the target directory followed by
``os.replace`` so readers never observe a half-written file.
"""
import csv
import io
import json
import os
import tempfile

import numpy as np

PBM_LINE = 70


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pbm_bytes(dense, comment=None):
    """Plain PBM: ``1`` marks an admissible pair. Lines are kept under 70 chars."""
    dense = np.asarray(dense, dtype=bool)
    rows, cols = dense.shape
    out = ["P1"]
    if comment:
        out.append(f"# {comment}")
    out.append(f"{cols} {rows}")
    for row in dense:
        bits = "".join("1" if v else "0" for v in row)
        out.extend(bits[i : i + PBM_LINE] for i in range(0, len(bits), PBM_LINE))
    return ("\n".join(out) + "\n").encode("ascii")


def read_pbm(data):
    """Parse plain PBM bytes back into a boolean array."""
    tokens = []
    for line in data.decode("ascii").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    if not tokens or tokens[0] != "P1":
        raise ValueError("not a plain PBM (P1) file")
    cols, rows = (int(x) for x in tokens[1].split())
    bits = [c for c in "".join(tokens[2:]) if c in "01"]
    if len(bits) != rows * cols:
        raise ValueError("PBM payload size does not match header")
    return np.array([c == "1" for c in bits], dtype=bool).reshape(rows, cols)


def coords_csv_bytes(layers):
    """CSV ``layer,head,row,col`` (0-based, class token = 0) for ``layers[l][h]`` masks."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["layer", "head", "row", "col"])
    for li, heads in enumerate(layers):
        for hi, mask in enumerate(heads):
            rows, cols = mask.pairs()
            for r, c in zip(rows.tolist(), cols.tolist()):
                writer.writerow([li, hi, r, c])
    return buf.getvalue().encode("utf-8")


def json_bytes(obj):
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def table_csv_bytes(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")
