import numpy as np
import pytest

from fetoep.assembly import assemble_diffusion, assemble_system
from fetoep.coefficients import CoefficientField
from fetoep.matrix_io import matrix_symmetry, read_matrix, read_vector, write_matrix, write_vector
from fetoep.mesh import generate_hex_structured, perturb


@pytest.mark.parametrize("with_b", [False, True])
def test_round_trip_exact(tmp_path, with_b):
    mesh = perturb(generate_hex_structured(4), 0.2, 0)
    a = CoefficientField.a1()
    A = assemble_system(mesh, a, CoefficientField.linear() if with_b else None)
    path = write_matrix(tmp_path / "A.mtx", A)
    back = read_matrix(path)
    assert (back != A).nnz == 0
    np.testing.assert_array_equal(back.indptr, A.indptr)
    assert matrix_symmetry(path) == ("general" if with_b else "symmetric")


def test_forced_general(tmp_path):
    A = assemble_diffusion(generate_hex_structured(2))
    path = write_matrix(tmp_path / "g.mtx", A, symmetric=False)
    assert matrix_symmetry(path) == "general"
    assert (read_matrix(path) != A).nnz == 0


def test_vector_round_trip(tmp_path, rng):
    v = rng.standard_normal(50)
    np.testing.assert_array_equal(read_vector(write_vector(tmp_path / "v.txt", v)), v)


def test_unwritable_path_reports_path(tmp_path):
    target = tmp_path / "missing" / "A.mtx"
    with pytest.raises(OSError, match="missing"):
        write_matrix(target, assemble_diffusion(generate_hex_structured(2)))
