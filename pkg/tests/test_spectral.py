import numpy as np
import pytest
import scipy.sparse as sp

from fetoep.assembly import assemble_convection, assemble_diffusion
from fetoep.coefficients import CoefficientField
from fetoep.errors import InvalidParameterError, SizeError
from fetoep.mesh import generate_hex_structured, generate_square_fk, perturb
from fetoep.precond import build_exact
from fetoep.spectral import (
    SpectrumReport, eigenvector_conditioning, eigenvector_law, hss_split, inf_norm, power_norm2,
    preconditioned_spectrum, rayleigh_bounds, scaled_defect_scan, skew_norm_scan,
)

A1 = CoefficientField.a1()
B = CoefficientField.linear()


def hex_system(m, a=A1, b=B):
    mesh = generate_hex_structured(m)
    theta = assemble_diffusion(mesh, a)
    psi = assemble_convection(mesh, b)
    return mesh, theta, psi, build_exact(mesh, a, theta=theta)


class TestHSS:
    def test_split(self):
        _, theta, psi, _ = hex_system(6)
        A = (theta + psi).tocsr()
        H, S = hss_split(A)
        assert (H != H.T).nnz == 0
        assert (S != -S.T).nnz == 0
        assert np.abs((H + S - A).toarray()).max() <= np.spacing(np.abs(A).max())
        E = (psi + psi.T) * 0.5
        assert np.abs((H - theta - E).toarray()).max() <= 2 * np.spacing(np.abs(A).max())

    def test_symmetric_input(self):
        _, theta, _, _ = hex_system(4)
        H, S = hss_split(theta)
        assert S.nnz == 0 and (H != theta).nnz == 0

    def test_constant_b(self):
        mesh, theta, psi, _ = hex_system(5, b=(1.0, 2.0))
        H, _ = hss_split(theta + psi)
        assert np.abs((H - theta).toarray()).max() <= 2 * np.spacing(np.abs(theta).max())

    def test_rejects_rectangular(self):
        with pytest.raises(InvalidParameterError):
            hss_split(sp.csr_matrix(np.ones((2, 3))))


class TestSpectrum:
    def test_identity_case(self):
        mesh = perturb(generate_hex_structured(4), 0.2, 0)
        rep = preconditioned_spectrum(assemble_diffusion(mesh), build_exact(mesh, 1.0))
        np.testing.assert_allclose(rep.eigenvalues, 1.0, atol=1e-12)
        assert rep.outliers == {0.1: 0, 0.05: 0}

    def test_report_definition(self):
        rep = SpectrumReport.from_eigenvalues([1.2 + 0.1j, 0.5, 1.0, 1.2 - 0.1j, 1.04])
        assert rep.outliers[0.1] == 3 and rep.outliers[0.05] == 3
        assert list(rep.eigenvalues) == [0.5, 1.0, 1.04, 1.2 - 0.1j, 1.2 + 0.1j]
        assert rep.scatter_csv().splitlines()[0] == "re,im"

    def test_field_of_values_containment(self):
        for m, a in ((4, A1), (6, CoefficientField.a3(0.4))):
            mesh, theta, psi, P = hex_system(m, a=a)
            A = (theta + psi).tocsr()
            rep = preconditioned_spectrum(A, P)
            (rl, rh), (il, ih) = rayleigh_bounds(A, P)
            tol = 1e-10
            assert np.all(rep.eigenvalues.real >= rl - tol) and np.all(rep.eigenvalues.real <= rh + tol)
            assert np.all(rep.eigenvalues.imag >= il - tol) and np.all(rep.eigenvalues.imag <= ih + tol)

    def test_clustering_trend(self):
        rows = []
        for m in (4, 8, 16):
            _, theta, psi, P = hex_system(m)
            rep = preconditioned_spectrum((theta + psi).tocsr(), P)
            rows.append(rep)
        assert all(r.min_real > 0.5 for r in rows)
        assert all(r.max_abs_imag < 0.5 for r in rows)
        assert rows[2].outliers[0.1] <= rows[1].outliers[0.1]

    def test_imaginary_part_clustered_at_zero(self):
        imag = []
        for m in (4, 8, 16):
            _, theta, psi, P = hex_system(m)
            rep = preconditioned_spectrum((theta + psi).tocsr(), P, part="imag")
            assert rep.center == 0.0
            np.testing.assert_allclose(rep.eigenvalues.imag, 0.0, atol=1e-10)
            imag.append(rep.max_abs)
        assert max(imag) < 0.5
        # symmetric spectrum of a Hermitian pencil from a skew matrix
        ev = np.sort(rep.eigenvalues.real)
        np.testing.assert_allclose(ev, -ev[::-1], atol=1e-10)

    def test_real_part(self):
        _, theta, psi, P = hex_system(8)
        rep = preconditioned_spectrum((theta + psi).tocsr(), P, part="real")
        assert rep.min_real > 0

    def test_size_limit(self):
        mesh = generate_square_fk(66)
        A = assemble_diffusion(mesh)
        with pytest.raises(SizeError):
            preconditioned_spectrum(A, build_exact(mesh, 1.0, theta=A, a_one=A))

    def test_bad_part(self):
        _, theta, _, P = hex_system(2)
        with pytest.raises(InvalidParameterError):
            preconditioned_spectrum(theta, P, part="abs")


class TestEigenvectors:
    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_identity(self, m):
        rep = eigenvector_conditioning(generate_hex_structured(m), 1.5, (1.0, -0.5))
        assert rep.identity_error <= 1e-8
        assert rep.residual <= 1e-10

    def test_law(self):
        rows, slope = eigenvector_law("hex", [2, 4, 8, 16])
        assert -1.2 <= slope <= -0.8

    def test_zero_convection(self):
        rows, slope = eigenvector_law("hex", [2, 4, 8], b=(0.0, 0.0))
        assert all(r.identity_error <= 1e-8 for r in rows)
        assert -1.2 <= slope <= -0.8

    def test_rejects_variable_coefficients(self):
        with pytest.raises(InvalidParameterError):
            eigenvector_conditioning(generate_hex_structured(2), A1, (1.0, 1.0))
        with pytest.raises(InvalidParameterError):
            eigenvector_conditioning(generate_hex_structured(2), 1.0, B)


class TestScans:
    def test_constant_b_zero(self):
        scan = skew_norm_scan("hex", (1.0, 2.0), [4, 8])
        assert all(r[3] <= 1e-15 and r[4] <= 1e-15 for r in scan.rows)

    def test_linear_b_h_squared(self):
        scan = skew_norm_scan("hex", B, [4, 8, 16, 32])
        assert scan.slope >= 1.8
        assert all(r[4] <= r[3] * (1 + 1e-8) for r in scan.rows)
        assert scan.to_csv().startswith("label,m,n,h,inf_norm,two_norm\n")

    def test_scaled_defect(self):
        scan = scaled_defect_scan("hex", A1, [4, 8, 16, 32])
        assert 1.8 <= scan.slope <= 2.2

    def test_power_norm(self, rng):
        M = sp.csr_matrix(rng.standard_normal((30, 30)))
        assert power_norm2(M, iterations=500, tol=1e-14) == pytest.approx(np.linalg.norm(M.toarray(), 2), rel=1e-6)
        assert power_norm2(sp.csr_matrix((3, 3))) == 0.0
        assert inf_norm(M) == pytest.approx(np.abs(M.toarray()).sum(axis=1).max())
