import numpy as np
import pytest

from shrinkerlab.catalog import GeneralizedCylinder
from shrinkerlab.errors import MeshFormatError
from shrinkerlab.io import format_mesh, parse_mesh, parse_mesh_text, write_mesh
from shrinkerlab.mesh import build_mesh

GOOD = """SHRNK 1 2 3 2 2
0 0
1 0
2 0.5
0 1
1 2
1
2
"""


@pytest.mark.parametrize("n,k", [(1, 0), (1, 1), (2, 1), (2, 2)])
def test_round_trip_exact(tmp_path, n, k):
    m = build_mesh(GeneralizedCylinder(n, k), 3.0, 0.3)
    path = tmp_path / "m.shrnk"
    write_mesh(m, path)
    back = parse_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.simplices, m.simplices)
    assert np.array_equal(back.boundary_facets, m.boundary_facets)
    assert format_mesh(back) == format_mesh(m)


def test_good_file():
    m = parse_mesh_text(GOOD)
    assert m.n == 1 and m.num_vertices == 3
    assert m.boundary_vertices.tolist() == [True, False, True]


def test_empty_surface():
    m = parse_mesh_text("SHRNK 2 3 0 0 0\n")
    assert m.num_vertices == 0 and len(m.simplices) == 0


BAD = [
    ("", 1),
    ("SHRNX 1 2 0 0 0\n", 1),
    ("SHRNK 1 2 a 0 0\n", 1),
    ("SHRNK 1 1 0 0 0\n", 1),
    (GOOD.replace("1 0\n", "1 nan\n", 1), 3),
    (GOOD.replace("1 0\n", "1 x\n", 1), 3),
    (GOOD.replace("2 0.5\n", "2\n"), 4),
    (GOOD.replace("1 2\n", "1 7\n"), 6),
    (GOOD.replace("1 2\n", "1 1\n"), 6),
    (GOOD.replace("\n2\n", "\n9\n"), 8),
    (GOOD + "junk\n", 9),
    ("\n".join(GOOD.splitlines()[:5]) + "\n", 6),
    ("SHRNK 2 3 3 1 0\n0 0 0\n1 0 0\n2 0 0\n0 1 2\n", 5),
]


@pytest.mark.parametrize("text,line", BAD)
def test_errors_name_the_line(text, line):
    with pytest.raises(MeshFormatError) as exc:
        parse_mesh_text(text)
    assert exc.value.lineno == line
    assert str(exc.value).startswith(f"line {line}:")
