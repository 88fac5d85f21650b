"""CSV and legacy-VTK writers for snapshots, diagnostics and study tables.

Floats are written with repr so that files round-trip losslessly; the VTK
files use the legacy ASCII structured-points layout with one scalar field
per file, laying cell values on the lattice of cell centers.
"""

from __future__ import annotations

import csv

import numpy as np

from .mesh import Mesh
from .sim import Diagnostics, StudyReport

DIAGNOSTIC_COLUMNS = (
    "step",
    "time",
    "mass",
    "min_u",
    "max_u",
    "min_c",
    "max_c",
    "l2_u",
    "h1_u",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # plain-float repr even for numpy scalars
    return str(value)


def write_snapshot_csv(path, mesh: Mesh, u, c) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "cx", "cy", "u", "c"])
        for k in range(mesh.n_cells):
            writer.writerow(
                [
                    k,
                    _fmt(float(mesh.cell_centers[k, 0])),
                    _fmt(float(mesh.cell_centers[k, 1])),
                    _fmt(float(u[k])),
                    _fmt(float(c[k])),
                ]
            )


def read_snapshot_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["cell_index", "cx", "cy", "u", "c"]:
            raise ValueError(f"{path}: not a snapshot file (header {header})")
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: snapshot has no data rows")
    arr = np.asarray(rows)
    return {
        "cell_index": arr[:, 0].astype(int),
        "cx": arr[:, 1],
        "cy": arr[:, 2],
        "u": arr[:, 3],
        "c": arr[:, 4],
    }


def write_vtk_structured_points(path, mesh: Mesh, values, name: str) -> None:
    """Legacy ASCII structured-points file with a single scalar field."""
    values = np.asarray(values, dtype=float)
    cx0 = mesh.x_range[0] + 0.5 * mesh.dx
    cy0 = mesh.y_range[0] + 0.5 * mesh.dy
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"chemofv field {name}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {mesh.nx} {mesh.ny} 1\n")
        fh.write(f"ORIGIN {cx0!r} {cy0!r} 0.0\n")
        fh.write(f"SPACING {mesh.dx!r} {mesh.dy!r} 1.0\n")
        fh.write(f"POINT_DATA {mesh.n_cells}\n")
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in values:  # row-major, x fastest, matches cell indexing
            fh.write(f"{float(v)!r}\n")


def write_diagnostics_csv(path, diagnostics: Diagnostics) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for rec in diagnostics.records:
            writer.writerow([_fmt(getattr(rec, col)) for col in DIAGNOSTIC_COLUMNS])


def write_study_csv(path, report: StudyReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "dt", "l2_error", "rate"])
        for variant, row in report.rows():
            writer.writerow(
                [
                    variant,
                    _fmt(row.dt),
                    _fmt(row.error),
                    "" if row.rate is None else _fmt(row.rate),
                ]
            )


def format_study_table(report: StudyReport) -> str:
    """Aligned text table: one dt column, (error, rate) pair per variant."""
    variants = list(report.tables)
    headers = ["dt"]
    for v in variants:
        headers += [f"L2-error {v}", "rate"]
    dts = [row.dt for row in report.tables[variants[0]]]
    lines = [headers]
    for i, dt in enumerate(dts):
        line = [f"{dt:g}"]
        for v in variants:
            row = report.tables[v][i]
            line.append(f"{row.error:.3e}")
            line.append("---" if row.rate is None else f"{row.rate:.3f}")
        lines.append(line)
    widths = [max(len(line[j]) for line in lines) for j in range(len(headers))]
    rendered = [
        "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
        for line in lines
    ]
    rendered.insert(1, "-" * len(rendered[0]))
    rendered.insert(
        0, f"reference dt = {report.reference_dt:g}, field = {report.field_name}"
    )
    return "\n".join(rendered) + "\n"


def write_contour_csv(path, ys, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "u"])
        for y, v in zip(ys, values):
            writer.writerow([_fmt(float(y)), _fmt(float(v))])
