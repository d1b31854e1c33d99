"""Binary and CSV serialization for sampled fields.

Binary layout: magic "SPDE1", one version byte, one flag byte (bit 0: eta
present, bit 1: window metadata present), one byte for the component count,
then float64 header values (b, c, T, plus window half-width and margin when
flagged), int64 nx and nt, and the row-major float64 payload (values, then
eta when present).
"""

import struct

import numpy as np

MAGIC = b"SPDE1"
VERSION = 1

_FLAG_ETA = 1
_FLAG_WINDOW = 2


def write_binary(fh, grid, values, eta=None, window=None):
    """Write one field to a binary stream; ``window`` is (half_width, margin)."""
    dim = 1 if values.ndim == 2 else values.shape[2]
    flags = (_FLAG_ETA if eta is not None else 0) | (_FLAG_WINDOW if window is not None else 0)
    fh.write(MAGIC)
    fh.write(struct.pack("<BBB", VERSION, flags, dim))
    fh.write(struct.pack("<ddd", grid.b, grid.c, grid.T))
    if window is not None:
        fh.write(struct.pack("<dd", *window))
    fh.write(struct.pack("<qq", grid.nx, grid.nt))
    fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    if eta is not None:
        fh.write(np.ascontiguousarray(eta, dtype="<f8").tobytes())


def read_binary(fh):
    """Read a field written by write_binary; returns a dict of the parts."""
    magic = fh.read(5)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    version, flags, dim = struct.unpack("<BBB", fh.read(3))
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    b, c, T = struct.unpack("<ddd", fh.read(24))
    window = None
    if flags & _FLAG_WINDOW:
        window = struct.unpack("<dd", fh.read(16))
    nx, nt = struct.unpack("<qq", fh.read(16))
    shape = (nt + 1, nx + 2) if dim == 1 else (nt + 1, nx + 2, dim)
    count = int(np.prod(shape))
    values = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape).copy()
    eta = None
    if flags & _FLAG_ETA:
        eta = np.frombuffer(fh.read(nt * nx * 8), dtype="<f8").reshape(nt, nx).copy()
    return {
        "b": b, "c": c, "T": T, "nx": nx, "nt": nt, "dim": dim,
        "values": values, "eta": eta, "window": window,
    }


def write_csv(fh, grid, values, eta=None):
    """Rows (t, x, value[, eta]); vector fields expand to value0..value{d-1}.

    The eta column pairs eta[k-1, i-1] with the node value at (t_k, x_i);
    cells without a reflection increment (t = 0 and boundary columns) carry 0.
    """
    dim = 1 if values.ndim == 2 else values.shape[2]
    ts = grid.t_nodes
    xs = grid.x_nodes
    if dim == 1:
        header = "t,x,value"
    else:
        header = "t,x," + ",".join(f"value{j}" for j in range(dim))
    if eta is not None:
        header += ",eta"
    fh.write(header + "\n")
    for k in range(ts.size):
        for i in range(xs.size):
            if dim == 1:
                cells = [repr(float(values[k, i]))]
            else:
                cells = [repr(float(values[k, i, j])) for j in range(dim)]
            row = [repr(float(ts[k])), repr(float(xs[i]))] + cells
            if eta is not None:
                inside = 0 < k and 0 < i < xs.size - 1
                row.append(repr(float(eta[k - 1, i - 1])) if inside else "0.0")
            fh.write(",".join(row) + "\n")


def write_field_path(path_obj, fh, fmt="csv"):
    """Serialize a FieldPath in the requested format."""
    if fmt == "csv":
        write_csv(fh, path_obj.grid, path_obj.values, path_obj.eta)
    elif fmt == "bin":
        write_binary(fh, path_obj.grid, path_obj.values, path_obj.eta)
    else:
        raise ValueError(f"unknown format {fmt!r}")
