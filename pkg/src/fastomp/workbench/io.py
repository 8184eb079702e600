"""CSV matrices and PGM images."""

import numpy as np

from ..errors import DataError, ParseError


def load_csv_matrix(path):
    """Read a headerless, comma-separated, rectangular numeric matrix.

    LF and CRLF line endings are accepted.  Ragged rows, non-numeric cells
    and empty files raise :class:`ParseError` with the 1-based line number.
    """
    with open(path, "r", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file", line=1)
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"{path}: expected {width} values, found {len(cells)}", line=lineno)
        try:
            row = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise ParseError(f"{path}: non-numeric cell {bad.strip()!r}", line=lineno) from None
        if not all(np.isfinite(row)):
            raise ParseError(f"{path}: non-finite value", line=lineno)
        rows.append(row)
    return np.array(rows, dtype=float)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_csv_matrix(m, path):
    """Write ``m`` with 17 significant digits so that loading reproduces it."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    with open(path, "w", newline="") as fh:
        for row in m:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def load_csv_vector(path):
    """A single row or single column CSV as a 1-D array."""
    m = load_csv_matrix(path)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise DataError(f"{path}: expected a single row or column, got shape {m.shape}")
    return m.reshape(-1)


def save_csv_vector(v, path):
    save_csv_matrix(np.asarray(v, dtype=float).reshape(-1, 1), path)


def _pgm_tokens(data, count, start):
    """Pull ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i >= n:
            raise DataError("truncated PGM header")
        if data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def load_pgm(path):
    """Read a grayscale PGM (``P2`` ASCII or ``P5`` binary, maxval <= 255).

    Returns ``(values, (rows, cols))`` where ``values`` are the pixels in
    row-major order scaled to ``[0, 1]``.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise DataError(f"{path}: not a P2/P5 PGM file (magic {magic!r})")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
        cols, rows, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if cols < 1 or rows < 1 or not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid PGM dimensions or maxval")
    count = rows * cols

    if magic == b"P5":
        if maxval > 255:
            raise DataError(f"{path}: binary PGM with maxval {maxval} > 255 is not supported")
        payload = data[pos + 1 : pos + 1 + count]  # one whitespace byte ends the header
        if len(payload) < count:
            raise DataError(f"{path}: truncated payload ({len(payload)} of {count} bytes)")
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(float)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise DataError(f"{path}: truncated payload ({len(body)} of {count} values)")
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=float)
        except ValueError:
            raise DataError(f"{path}: non-integer pixel value") from None
    if pixels.max(initial=0) > maxval:
        raise DataError(f"{path}: pixel value exceeds maxval {maxval}")
    return pixels / maxval, (rows, cols)


def save_pgm(img, path, binary=True, maxval=255):
    """Write a 2-D array of values in ``[0, 1]`` as an 8-bit PGM."""
    img = np.asarray(img, dtype=float)
    q = np.clip(np.rint(img * maxval), 0, maxval).astype(np.uint8 if maxval < 256 else np.uint16)
    rows, cols = img.shape
    header = f"{'P5' if binary else 'P2'}\n{cols} {rows}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(q.astype(np.uint8).tobytes())
        else:
            for row in q:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())
