"""Legacy-VTK ASCII output for meshes and vertex scalar fields."""

import numpy as np

_CELL_TYPE = {2: 5, 3: 10}  # VTK_TRIANGLE, VTK_TETRA


def write_legacy_vtk(mesh, path, point_data=None, comment="pointctl output"):
    """Write an unstructured grid with optional per-vertex scalar fields.

    The comment goes on the VTK title line (max 255 chars), useful for
    recording how a sampled field should be interpreted.
    """
    pts = mesh.vertices
    if mesh.dim == 2:
        pts = np.column_stack([pts, np.zeros(mesh.num_vertices)])
    k = mesh.dim + 1
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(comment[:255].replace("\n", " ") + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for p in pts:
            fh.write(f"{p[0]:.16g} {p[1]:.16g} {p[2]:.16g}\n")
        fh.write(f"CELLS {mesh.num_cells} {mesh.num_cells * (k + 1)}\n")
        for cell in mesh.cells:
            fh.write(f"{k} " + " ".join(str(int(v)) for v in cell) + "\n")
        fh.write(f"CELL_TYPES {mesh.num_cells}\n")
        fh.write("\n".join([str(_CELL_TYPE[mesh.dim])] * mesh.num_cells) + "\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.shape[0] != mesh.num_vertices:
                    raise ValueError(f"field {name!r} is not a per-vertex scalar")
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in values:
                    fh.write(f"{v:.16g}\n")
