"""PLY (ascii / binary) and OBJ readers, PLY writer with custom vertex properties."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .trimesh import TriangleMesh

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_NUMPY_TO_PLY = {"i1": "char", "u1": "uchar", "i2": "short", "u2": "ushort",
                 "i4": "int", "u4": "uint", "f4": "float", "f8": "double"}


@dataclass
class PlyElement:
    name: str
    count: int
    properties: list = field(default_factory=list)  # (name, dtype) or (name, count_dtype, item_dtype)
    data: dict = field(default_factory=dict)


@dataclass
class PlyData:
    elements: dict
    comments: list

    def vertex(self, name):
        return self.elements["vertex"].data[name]


def _parse_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise InvalidInputError("not a PLY file")
    fmt = None
    comments = []
    elements = []
    while True:
        line = fh.readline()
        if not line:
            raise InvalidInputError("truncated PLY header")
        tok = line.decode("ascii", errors="replace").strip().split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "comment":
            comments.append(line.decode("utf-8").strip()[len("comment "):])
        elif tok[0] == "obj_info":
            continue
        elif tok[0] == "element":
            elements.append(PlyElement(tok[1], int(tok[2])))
        elif tok[0] == "property":
            if tok[1] == "list":
                elements[-1].properties.append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                elements[-1].properties.append((tok[2], _PLY_TYPES[tok[1]]))
        elif tok[0] == "end_header":
            break
        else:
            raise InvalidInputError(f"unknown PLY header line: {line!r}")
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise InvalidInputError(f"unsupported PLY format {fmt!r}")
    return fmt, comments, elements


def read_ply(path):
    with open(path, "rb") as fh:
        fmt, comments, elements = _parse_header(fh)
        body = fh.read()
    if fmt == "ascii":
        _read_ascii(body, elements)
    else:
        _read_binary(body, elements, "<" if fmt == "binary_little_endian" else ">")
    return PlyData({e.name: e for e in elements}, comments)


def _read_ascii(body, elements):
    tokens = body.split()
    pos = 0
    for el in elements:
        cols = {p[0]: [] for p in el.properties}
        for _ in range(el.count):
            for p in el.properties:
                if len(p) == 3:
                    n = int(tokens[pos])
                    pos += 1
                    cols[p[0]].append(np.array(tokens[pos:pos + n], dtype=np.float64).astype(p[2]))
                    pos += n
                else:
                    cols[p[0]].append(tokens[pos])
                    pos += 1
        for p in el.properties:
            if len(p) == 3:
                el.data[p[0]] = cols[p[0]]
            else:
                raw = np.array(cols[p[0]], dtype=np.float64) if p[1][0] == "f" else np.array(cols[p[0]], dtype=np.int64)
                el.data[p[0]] = raw.astype(p[1])


def _read_binary(body, elements, order):
    pos = 0
    for el in elements:
        if all(len(p) == 2 for p in el.properties):
            dt = np.dtype([(p[0], order + p[1]) for p in el.properties])
            arr = np.frombuffer(body, dtype=dt, count=el.count, offset=pos)
            pos += dt.itemsize * el.count
            for p in el.properties:
                el.data[p[0]] = arr[p[0]].astype(np.dtype(p[1]).newbyteorder("="))
            continue
        # fast path: a single list property whose rows all have the same length
        if len(el.properties) == 1 and el.count:
            name, cdt, idt = el.properties[0]
            cdt = np.dtype(order + cdt)
            idt = np.dtype(order + idt)
            first = int(np.frombuffer(body, dtype=cdt, count=1, offset=pos)[0])
            rec = np.dtype([("n", cdt), ("v", idt, (first,))])
            if pos + rec.itemsize * el.count <= len(body):
                arr = np.frombuffer(body, dtype=rec, count=el.count, offset=pos)
                if np.all(arr["n"] == first):
                    el.data[name] = arr["v"].astype(idt.newbyteorder("="))
                    pos += rec.itemsize * el.count
                    continue
        cols = {p[0]: [] for p in el.properties}
        for _ in range(el.count):
            for p in el.properties:
                if len(p) == 3:
                    cdt = np.dtype(order + p[1])
                    idt = np.dtype(order + p[2])
                    n = int(np.frombuffer(body, dtype=cdt, count=1, offset=pos)[0])
                    pos += cdt.itemsize
                    cols[p[0]].append(np.frombuffer(body, dtype=idt, count=n, offset=pos).copy())
                    pos += idt.itemsize * n
                else:
                    dt = np.dtype(order + p[1])
                    cols[p[0]].append(np.frombuffer(body, dtype=dt, count=1, offset=pos)[0])
                    pos += dt.itemsize
        for p in el.properties:
            el.data[p[0]] = cols[p[0]] if len(p) == 3 else np.array(cols[p[0]], dtype=p[1])


def write_ply(path, vertex, faces=None, comments=(), binary=True):
    """Write a PLY file.

    ``vertex`` maps property name to a 1-D array; insertion order is the
    on-disk order and each array's dtype picks the PLY type. ``faces`` is an
    (F, 3) index array written as ``list uchar int vertex_indices``.
    """
    names = list(vertex)
    cols = [np.asarray(vertex[n]) for n in names]
    count = len(cols[0]) if cols else 0
    for n, c in zip(names, cols):
        if c.ndim != 1 or len(c) != count:
            raise InvalidInputError(f"vertex property {n!r} has shape {c.shape}, expected ({count},)")
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0"]
    header += [f"comment {c}" for c in comments]
    header.append(f"element vertex {count}")
    for n, c in zip(names, cols):
        header.append(f"property {_NUMPY_TO_PLY[c.dtype.str[1:]]} {n}")
    if faces is not None:
        faces = np.asarray(faces, dtype=np.int32).reshape(-1, 3)
        header.append(f"element face {len(faces)}")
        header.append("property list uchar int vertex_indices")
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("utf-8"))
        if binary:
            dt = np.dtype([(n, "<" + c.dtype.str[1:]) for n, c in zip(names, cols)])
            rec = np.empty(count, dtype=dt)
            for n, c in zip(names, cols):
                rec[n] = c
            fh.write(rec.tobytes())
            if faces is not None:
                fdt = np.dtype([("n", "u1"), ("v", "<i4", (3,))])
                frec = np.empty(len(faces), dtype=fdt)
                frec["n"] = 3
                frec["v"] = faces
                fh.write(frec.tobytes())
        else:
            lines = []
            for i in range(count):
                lines.append(" ".join(_ascii(c[i]) for c in cols))
            if faces is not None:
                lines += [f"3 {a} {b} {c}" for a, b, c in faces]
            fh.write(("\n".join(lines) + ("\n" if lines else "")).encode("ascii"))


def _ascii(v):
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    return str(int(v))


def read_mesh(path):
    """Load a triangle mesh from .ply or .obj; polygons are fan-triangulated."""
    path = str(path)
    if path.lower().endswith(".ply"):
        ply = read_ply(path)
        v = np.stack([ply.vertex(k).astype(np.float64) for k in ("x", "y", "z")], axis=1)
        face_el = ply.elements.get("face")
        if face_el is None:
            raise InvalidInputError(f"{path} has no faces")
        key = "vertex_indices" if "vertex_indices" in face_el.data else "vertex_index"
        faces = _triangulate(face_el.data[key])
        return TriangleMesh.cleaned(v, faces)
    if path.lower().endswith(".obj"):
        return read_obj(path)
    raise InvalidInputError(f"unsupported mesh format: {path}")


def _triangulate(polys):
    if isinstance(polys, np.ndarray) and polys.ndim == 2:
        polys = list(polys)
    tris = []
    for p in polys:
        p = np.asarray(p, dtype=np.int64)
        for k in range(1, len(p) - 1):
            tris.append((p[0], p[k], p[k + 1]))
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def read_obj(path):
    verts, polys = [], []
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "v":
                verts.append([float(x) for x in tok[1:4]])
            elif tok[0] == "f":
                idx = []
                for t in tok[1:]:
                    i = int(t.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                polys.append(idx)
    return TriangleMesh.cleaned(np.array(verts, dtype=np.float64), _triangulate(polys))


def write_obj(path, mesh):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")

