"""Triangle mesh parsing, writing and normalization (OBJ / PLY).

All meshes live in a fixed canonical model frame: +X forward, +Z up,
right-handed.  Normalization centers the axis-aligned bounding box at the
origin and scales the longest bbox edge to length 1.
"""

import struct

import numpy as np

FORWARD_AXIS = np.array([1.0, 0.0, 0.0])
UP_AXIS = np.array([0.0, 0.0, 1.0])


class MeshError(ValueError):
    """Raised for malformed mesh files or degenerate geometry."""


class TriMesh:
    """Indexed triangle mesh with optional per-vertex RGB colors in [0,1].

    Instances are treated as immutable; operations return new meshes.
    """

    def __init__(self, vertices, faces, vertex_colors=None):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if vertex_colors is not None:
            vertex_colors = np.asarray(vertex_colors, dtype=np.float64).reshape(-1, 3)
            if len(vertex_colors) != len(self.vertices):
                raise MeshError("vertex_colors length does not match vertices")
        self.vertex_colors = vertex_colors
        if len(self.vertices) < 1 or len(self.faces) < 1:
            raise MeshError("mesh must have at least 1 vertex and 1 face")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshError("face index out of range")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, rotation=None, translation=None, scale=1.0):
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if translation is not None:
            v = v + np.asarray(translation)
        return TriMesh(v, self.faces, self.vertex_colors)

    def face_areas(self):
        v = self.vertices
        f = self.faces
        e1 = v[f[:, 1]] - v[f[:, 0]]
        e2 = v[f[:, 2]] - v[f[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def _fan_triangulate(indices):
    return [(indices[0], indices[i - 1], indices[i]) for i in range(2, len(indices))]


def parse_obj(data):
    """Parse Wavefront OBJ bytes (or str) into a TriMesh.

    Polygon faces are fan-triangulated.  Negative (relative) indices are
    resolved against the vertex count at the time the face appears.
    Normals, texcoords, materials and groups are ignored; per-vertex colors
    are read from extended ``v x y z r g b`` lines.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    vertices = []
    colors = []
    faces = []
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if tok[0] == "v":
            try:
                vals = [float(x) for x in tok[1:]]
            except ValueError:
                raise MeshError(f"malformed vertex line {lineno}: {raw!r}")
            if len(vals) < 3:
                raise MeshError(f"malformed vertex line {lineno}: {raw!r}")
            vertices.append(vals[:3])
            if len(vals) >= 6:
                colors.append(vals[3:6])
            else:
                colors.append(None)
        elif tok[0] == "f":
            idx = []
            for part in tok[1:]:
                s = part.split("/")[0]
                try:
                    i = int(s)
                except ValueError:
                    raise MeshError(f"malformed face line {lineno}: {raw!r}")
                if i < 0:
                    i = len(vertices) + i
                else:
                    i = i - 1
                if i < 0 or i >= len(vertices):
                    raise MeshError(f"face index out of range at line {lineno}")
                idx.append(i)
            if len(idx) < 3:
                raise MeshError(f"face with fewer than 3 vertices at line {lineno}")
            faces.extend(_fan_triangulate(idx))
    if not faces:
        raise MeshError("OBJ contains zero faces")
    if any(c is not None for c in colors):
        vertex_colors = [c if c is not None else [0.7, 0.7, 0.7] for c in colors]
    else:
        vertex_colors = None
    return TriMesh(vertices, faces, vertex_colors)


def write_obj(mesh):
    """Serialize a TriMesh as OBJ bytes; colors go on extended vertex lines."""
    lines = []
    for i, v in enumerate(mesh.vertices):
        if mesh.vertex_colors is not None:
            c = mesh.vertex_colors[i]
            lines.append("v %.9g %.9g %.9g %.9g %.9g %.9g" % (*v, *c))
        else:
            lines.append("v %.9g %.9g %.9g" % tuple(v))
    for f in mesh.faces:
        lines.append("f %d %d %d" % (f[0] + 1, f[1] + 1, f[2] + 1))
    return ("\n".join(lines) + "\n").encode("utf-8")


_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def parse_ply(data):
    """Parse ASCII or binary-little-endian PLY bytes into a TriMesh.

    Requires vertex x/y/z; uchar red/green/blue map to [0,1] colors.
    Binary-big-endian files are rejected.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MeshError("not a PLY file")
    nl = data.find(b"\n", end)
    header = data[:nl].decode("ascii", errors="replace")
    body = data[nl + 1:]

    fmt = None
    elements = []  # (name, count, [(prop_name, type) or ('list', count_t, item_t, name)])
    for raw in header.splitlines():
        tok = raw.strip().split()
        if not tok or tok[0] in ("ply", "comment", "obj_info", "end_header"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshError(f"unsupported PLY format: {fmt}")
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise MeshError("property before element in PLY header")
            if tok[1] == "list":
                elements[-1][2].append(("list", tok[2], tok[3], tok[4]))
            else:
                elements[-1][2].append((tok[2], tok[1]))
    if fmt is None:
        raise MeshError("PLY header missing format line")

    vertices = None
    colors = None
    faces = []

    if fmt == "ascii":
        rows = body.decode("ascii", errors="replace").split()
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(rows):
                raise MeshError("truncated PLY payload")
            out = rows[pos:pos + n]
            pos += n
            return out

        for name, count, props in elements:
            if name == "vertex":
                pnames = [p[0] for p in props]
                vals = np.array(take(count * len(props)), dtype=np.float64).reshape(count, len(props))
                vertices, colors = _extract_vertex_props(pnames, vals, props)
            elif name == "face":
                for _ in range(count):
                    n = int(take(1)[0])
                    idx = [int(x) for x in take(n)]
                    faces.extend(_fan_triangulate(idx))
            else:
                for _ in range(count):
                    for p in props:
                        if p[0] == "list":
                            n = int(take(1)[0])
                            take(n)
                        else:
                            take(1)
    else:
        off = 0

        def unpack(code, size, n=1):
            nonlocal off
            if off + size * n > len(body):
                raise MeshError("truncated PLY payload")
            out = struct.unpack_from("<" + code * n, body, off)
            off += size * n
            return out

        for name, count, props in elements:
            if name == "vertex":
                pnames = [p[0] for p in props]
                rows_ = np.empty((count, len(props)), dtype=np.float64)
                for r in range(count):
                    for j, p in enumerate(props):
                        if p[0] == "list":
                            raise MeshError("list property on vertex element unsupported")
                        code, size = _PLY_TYPES[p[1]]
                        rows_[r, j] = unpack(code, size)[0]
                vertices, colors = _extract_vertex_props(pnames, rows_, props)
            elif name == "face":
                for _ in range(count):
                    p = props[0]
                    if p[0] != "list":
                        raise MeshError("face element must carry a list property")
                    ccode, csize = _PLY_TYPES[p[1]]
                    icode, isize = _PLY_TYPES[p[2]]
                    n = int(unpack(ccode, csize)[0])
                    idx = unpack(icode, isize, n)
                    faces.extend(_fan_triangulate(list(idx)))
            else:
                for _ in range(count):
                    for p in props:
                        if p[0] == "list":
                            ccode, csize = _PLY_TYPES[p[1]]
                            icode, isize = _PLY_TYPES[p[2]]
                            n = int(unpack(ccode, csize)[0])
                            unpack(icode, isize, n)
                        else:
                            code, size = _PLY_TYPES[p[1]]
                            unpack(code, size)

    if vertices is None:
        raise MeshError("PLY has no vertex element")
    if not faces:
        raise MeshError("PLY contains zero faces")
    return TriMesh(vertices, faces, colors)


def _extract_vertex_props(pnames, vals, props):
    for axis in ("x", "y", "z"):
        if axis not in pnames:
            raise MeshError(f"PLY vertex element missing {axis}")
    xyz = vals[:, [pnames.index("x"), pnames.index("y"), pnames.index("z")]]
    colors = None
    if all(c in pnames for c in ("red", "green", "blue")):
        rgb = vals[:, [pnames.index("red"), pnames.index("green"), pnames.index("blue")]]
        # uchar channels are 0..255; float channels already in [0,1]
        red_type = props[pnames.index("red")][1]
        if red_type in ("uchar", "uint8"):
            rgb = rgb / 255.0
        colors = rgb
    return xyz, colors


def write_ply(mesh, binary=True):
    """Serialize a TriMesh as PLY bytes (binary-little-endian by default)."""
    has_color = mesh.vertex_colors is not None
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {mesh.n_vertices}")
    header += ["property double x", "property double y", "property double z"]
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append(f"element face {mesh.n_faces}")
    header.append("property list uchar int vertex_indices")
    header.append("end_header")
    out = [("\n".join(header) + "\n").encode("ascii")]
    if binary:
        for i, v in enumerate(mesh.vertices):
            out.append(struct.pack("<ddd", *v))
            if has_color:
                c = np.clip(np.round(mesh.vertex_colors[i] * 255), 0, 255).astype(int)
                out.append(struct.pack("<BBB", *c))
        for f in mesh.faces:
            out.append(struct.pack("<Biii", 3, *f))
    else:
        for i, v in enumerate(mesh.vertices):
            line = "%.17g %.17g %.17g" % tuple(v)
            if has_color:
                c = np.clip(np.round(mesh.vertex_colors[i] * 255), 0, 255).astype(int)
                line += " %d %d %d" % tuple(c)
            out.append((line + "\n").encode("ascii"))
        for f in mesh.faces:
            out.append(("3 %d %d %d\n" % tuple(f)).encode("ascii"))
    return b"".join(out)


def load_mesh(path):
    """Load a mesh from a .obj or .ply path based on extension."""
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if path.lower().endswith(".obj"):
        return parse_obj(data)
    if path.lower().endswith(".ply"):
        return parse_ply(data)
    raise MeshError(f"unsupported mesh extension: {path}")


def save_mesh(mesh, path):
    path = str(path)
    if path.lower().endswith(".obj"):
        data = write_obj(mesh)
    elif path.lower().endswith(".ply"):
        data = write_ply(mesh)
    else:
        raise MeshError(f"unsupported mesh extension: {path}")
    with open(path, "wb") as fh:
        fh.write(data)


def normalize_mesh(mesh):
    """Center the bbox at the origin and scale the longest edge to 1.

    Uniform scale; aspect ratios are preserved.  Raises MeshError when all
    vertices coincide.
    """
    lo, hi = mesh.bbox()
    extent = hi - lo
    longest = extent.max()
    if longest <= 0:
        raise MeshError("cannot normalize: all vertices coincident")
    center = (lo + hi) / 2.0
    v = (mesh.vertices - center) / longest
    return TriMesh(v, mesh.faces, mesh.vertex_colors)
