"""Reader/writer for ASCII Gmsh MSH files (format 2.2 and 4.1)."""
import logging
from pathlib import Path

import numpy as np

from .errors import DanglingVertexReference, MixedElementTypes, UnsupportedFormat
from .mesh import Mesh

log = logging.getLogger(__name__)

TRIANGLE, TETRAHEDRON = 2, 4
# element type code -> (topological dimension, number of nodes)
ELEMENT_TYPES = {
    1: (1, 2), 2: (2, 3), 3: (2, 4), 4: (3, 4), 5: (3, 8), 6: (3, 6), 7: (3, 5),
    8: (1, 3), 9: (2, 6), 10: (2, 9), 11: (3, 10), 12: (3, 27), 13: (3, 18),
    14: (3, 14), 15: (0, 1), 16: (2, 8), 17: (3, 20), 18: (3, 15), 19: (3, 13),
    20: (2, 9), 21: (2, 10), 22: (2, 12), 23: (2, 15), 24: (2, 15), 25: (2, 21),
    26: (1, 4), 27: (1, 5), 28: (1, 6), 29: (3, 20), 30: (3, 35), 31: (3, 56),
}
SIMPLEX_CODE = {2: TRIANGLE, 3: TETRAHEDRON}


def _sections(lines):
    """Map section name -> list of body lines."""
    out = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            end = "$End" + name
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j == len(lines):
                raise UnsupportedFormat(f"section ${name} is not terminated")
            out.setdefault(name, lines[i + 1:j])
            i = j + 1
        else:
            i += 1
    return out


def _parse_v2(sec):
    nodes = {}
    body = sec["Nodes"]
    n = int(body[0])
    for line in body[1:n + 1]:
        parts = line.split()
        nodes[int(parts[0])] = [float(v) for v in parts[1:4]]
    elements = []
    body = sec["Elements"]
    n = int(body[0])
    for line in body[1:n + 1]:
        parts = [int(v) for v in line.split()]
        etype, ntags = parts[1], parts[2]
        elements.append((etype, parts[3 + ntags:]))
    return nodes, elements


def _parse_v4(sec):
    nodes = {}
    body = sec["Nodes"]
    nblocks = int(body[0].split()[0])
    i = 1
    for _ in range(nblocks):
        _, _, parametric, count = (int(v) for v in body[i].split())
        i += 1
        tags = [int(body[i + j]) for j in range(count)]
        i += count
        for j in range(count):
            coords = [float(v) for v in body[i + j].split()]
            nodes[tags[j]] = coords[:3]
        i += count
        if parametric:
            log.debug("ignoring parametric node coordinates")
    elements = []
    body = sec["Elements"]
    nblocks = int(body[0].split()[0])
    i = 1
    for _ in range(nblocks):
        _, _, etype, count = (int(v) for v in body[i].split())
        i += 1
        for j in range(count):
            parts = [int(v) for v in body[i + j].split()]
            elements.append((etype, parts[1:]))
        i += count
    return nodes, elements


def read_msh(text):
    """Parse MSH text into ``(vertices, elements, ignored)``.

    ``ignored`` counts lower-dimensional elements (boundary lines, points,
    surface triangles of a volume mesh) that were skipped.
    """
    lines = text.splitlines()
    sec = _sections(lines)
    if "MeshFormat" not in sec:
        raise UnsupportedFormat("missing $MeshFormat section")
    head = sec["MeshFormat"][0].split()
    version, filetype = head[0], int(head[1])
    if filetype != 0:
        raise UnsupportedFormat("binary MSH files are not supported")
    if version.startswith("2.2"):
        parse = _parse_v2
    elif version.startswith("4.1"):
        parse = _parse_v4
    else:
        raise UnsupportedFormat(f"MSH version {version} not supported (2.2 or 4.1 only)")
    if "Nodes" not in sec or "Elements" not in sec:
        raise UnsupportedFormat("missing $Nodes or $Elements section")
    try:
        nodes, raw = parse(sec)
    except (ValueError, IndexError) as exc:
        raise UnsupportedFormat(f"malformed MSH body: {exc}") from exc

    dims = [ELEMENT_TYPES.get(t, (None, None))[0] for t, _ in raw]
    if any(dm is None for dm in dims):
        bad = sorted({t for (t, _), dm in zip(raw, dims) if dm is None})
        raise UnsupportedFormat(f"unknown element type code(s) {bad}")
    dim = max(dims, default=0)
    if dim not in (2, 3):
        raise UnsupportedFormat("file contains no 2D or 3D elements")
    code = SIMPLEX_CODE[dim]
    others = sorted({t for (t, _), dm in zip(raw, dims) if dm == dim and t != code})
    if others:
        raise MixedElementTypes(
            f"{dim}D mesh contains non-simplex/high-order element types {others}"
        )
    cells = [conn for (t, conn), dm in zip(raw, dims) if dm == dim]
    ignored = len(raw) - len(cells)
    if ignored:
        log.warning("ignored %d lower-dimensional elements", ignored)

    cells = np.array(cells, dtype=np.int64)
    used = np.unique(cells)
    missing = [int(t) for t in used if t not in nodes]
    if missing:
        raise DanglingVertexReference(f"elements reference undefined node id(s) {missing[:10]}")
    coords = np.array([nodes[int(t)] for t in used], dtype=float)
    if dim == 2:
        if np.any(np.abs(coords[:, 2]) > 1e-14):
            raise UnsupportedFormat("2D mesh with non-planar z coordinates")
        coords = coords[:, :2]
    elements = np.searchsorted(used, cells)
    return coords, elements, ignored


def load_gmsh(path):
    """Load a simplicial Gmsh mesh and build connectivity.

    Orientation is fixed up so that every affine Jacobian determinant is
    positive. Only nodes referenced by volume elements are kept, renumbered
    by ascending node id.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise UnsupportedFormat(f"{path}: not an ASCII MSH file") from exc
    vertices, elements, _ = read_msh(text)
    return Mesh(vertices, elements)


def format_msh(mesh):
    """Render ``mesh`` as MSH 2.2 ASCII text (1-based ids, vertices then elements)."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.nvert)]
    for i, v in enumerate(mesh.vertices, start=1):
        xyz = list(v) + [0.0] * (3 - len(v))
        out.append(f"{i} " + " ".join(repr(float(c)) for c in xyz))
    out += ["$EndNodes", "$Elements", str(mesh.nelem)]
    code = SIMPLEX_CODE[mesh.dim]
    for i, el in enumerate(mesh.elements, start=1):
        out.append(f"{i} {code} 2 1 1 " + " ".join(str(int(v) + 1) for v in el))
    out.append("$EndElements")
    return "\n".join(out) + "\n"


def write_gmsh(mesh, path):
    Path(path).write_text(format_msh(mesh))
