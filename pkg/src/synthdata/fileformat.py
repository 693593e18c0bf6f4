"""
Binary dataset files.

Layout (all integers little-endian, see docs/FILE_FORMATS.md)::

    magic        4 bytes   b"F3DS"
    version      uint16
    header_len   uint32
    header       header_len bytes of UTF-8 JSON {"spec": {...}, "arrays": [names...]}
    per array:
      name_len   uint16,  name   (UTF-8)
      dtype_len  uint8,   dtype  (numpy dtype string, e.g. "<f8")
      ndim       uint8,   shape  ndim x uint64
      payload    prod(shape) * itemsize raw bytes, C order
"""

import json
import os
import struct

import numpy as np

from src.numcore.errors import FormatParseError, FormatVersionError
from src.synthdata.generator import SyntheticDataset
from src.synthdata.spec import SyntheticSpec

MAGIC = b"F3DS"
FORMAT_VERSION = 1


def _dataset_arrays(ds):
    arrays = [(f"input_{i}", x) for i, x in enumerate(ds.inputs)]
    arrays += [("present", ds.present.astype(np.uint8)), ("labels", ds.labels),
               ("graph", ds.graph), ("permutations", ds.permutations)]
    if ds.events is not None:
        arrays.append(("events", ds.events))
    return arrays


def _pack_array(name, arr):
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    arr = arr.astype(dtype, copy=False)
    name_b = name.encode("utf-8")
    dtype_b = arr.dtype.str.encode("ascii")
    parts = [struct.pack("<H", len(name_b)), name_b,
             struct.pack("<B", len(dtype_b)), dtype_b,
             struct.pack("<B", arr.ndim), struct.pack(f"<{arr.ndim}Q", *arr.shape),
             arr.tobytes(order="C")]
    return b"".join(parts)


def export_dataset(ds: SyntheticDataset, path):
    arrays = _dataset_arrays(ds)
    header = json.dumps({"spec": ds.spec.to_dict(), "arrays": [name for name, _ in arrays]}).encode("utf-8")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
        f.write(header)
        for name, arr in arrays:
            f.write(_pack_array(name, arr))
    return path


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatParseError(f"truncated dataset file: need {n} bytes for {what}, "
                                   f"{len(self.buf) - self.pos} left", self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def import_dataset(path):
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatParseError(f"not a dataset file (magic {magic!r})", 0)
    version, header_len = r.unpack("<HI", "version and header length")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"dataset format version {version} is not supported (expected {FORMAT_VERSION})")
    header_start = r.pos
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatParseError(f"corrupt dataset header: {e}", header_start) from e

    arrays = {}
    for expected in header["arrays"]:
        (name_len,) = r.unpack("<H", f"name length of '{expected}'")
        name = r.take(name_len, "array name").decode("utf-8")
        if name != expected:
            raise FormatParseError(f"expected array '{expected}', found '{name}'", r.pos - name_len)
        (dtype_len,) = r.unpack("<B", f"dtype length of '{name}'")
        dtype = np.dtype(r.take(dtype_len, f"dtype of '{name}'").decode("ascii"))
        (ndim,) = r.unpack("<B", f"rank of '{name}'")
        shape = r.unpack(f"<{ndim}Q", f"shape of '{name}'") if ndim else ()
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = r.take(nbytes, f"payload of '{name}'")
        arrays[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if r.pos != len(buf):
        raise FormatParseError(f"{len(buf) - r.pos} trailing bytes after the last array", r.pos)

    spec = SyntheticSpec.from_dict(header["spec"])
    inputs = [arrays[f"input_{i}"] for i in range(spec.clients)]
    return SyntheticDataset(spec, inputs, arrays["present"].astype(bool), arrays["labels"],
                            arrays["graph"], arrays["permutations"], arrays.get("events"))


def export_import(ds, path):
    """Write ``ds`` to ``path`` and read it back."""
    export_dataset(ds, path)
    return import_dataset(path)
