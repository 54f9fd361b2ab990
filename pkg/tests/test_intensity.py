import math

import numpy as np
import pytest

from pointtilt import EventSequence, InvariantError, MissingAux, NotDirectlySimulable
from pointtilt.families import AbsLink, AlphaFamily, ClippedLinearLink, GeometricSeq, ReluLink, ConstantSeq
from pointtilt.intensity import (
    AffineCount,
    BoxKernel,
    Constant,
    ExactAffine,
    ExpKernel,
    Hawkes,
    PiecewiseBirth,
    ResetOU,
    dimension,
    is_diffusion_driven,
    path_intensity,
    quadrature_grid,
    require_simulable,
    strictly_positive,
)
from pointtilt.simulate import path_stream, simulate_reset_ou


def seq(jumps, horizon=1.0):
    return EventSequence(horizon=horizon, jumps=tuple(np.asarray(j, float) for j in jumps))


class TestCatalog:
    def test_dimensions(self):
        assert dimension(Constant((1.0, 2.0))) == 2
        assert dimension(ExactAffine(1.0, 0.5, dimension=3)) == 3
        assert dimension(PiecewiseBirth(AlphaFamily(ConstantSeq(1.0)))) == 1

    def test_strictly_positive(self):
        assert strictly_positive(Constant((1.0, 2.0)))
        assert not strictly_positive(Constant((0.0, 2.0)))
        assert strictly_positive(ExactAffine(0.5, 0.0))
        assert not strictly_positive(ExactAffine(0.0, 0.5))
        assert strictly_positive(PiecewiseBirth(AlphaFamily(ConstantSeq(2.0))))

    def test_diffusion_tags(self):
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=1.0)
        assert is_diffusion_driven(ou)
        assert not is_diffusion_driven(Constant((1.0,)))
        with pytest.raises(NotDirectlySimulable):
            require_simulable(ou)

    def test_reset_ou_rejects_zero_b(self):
        with pytest.raises(InvariantError):
            ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(0.0), sigma=1.0)

    def test_hawkes_kernel_matrix_shape(self):
        with pytest.raises(InvariantError):
            Hawkes(links=(AbsLink(), ReluLink()), kernels=((ExpKernel(0.5, 1.0),),))

    def test_hawkes_sup_bound(self):
        hk = Hawkes(links=(AbsLink(), ReluLink()),
                    kernels=((ExpKernel(0.5, 1.0), BoxKernel(0.8, 2.0)),
                             (None, ExpKernel(0.2, 3.0))))
        assert hk.sup_bound() == 0.8
        assert hk.nonnegative_kernels()

    def test_negative_kernels_not_thinnable(self):
        hk = Hawkes(links=(AbsLink(),), kernels=((ExpKernel(-0.5, 1.0),),))
        with pytest.raises(NotDirectlySimulable):
            require_simulable(hk)


class TestCountIntensities:
    def test_affine_left_values(self):
        path = seq([[0.2, 0.6], [0.4]])
        pi = path_intensity(ExactAffine(1.0, 0.5, dimension=2), path)
        vals = pi.left_values(np.array([0.1, 0.2, 0.5, 1.0]))
        # left limits: counts 0, 0 (jump at 0.2 excluded), 2, 3
        assert vals[:, 0].tolist() == [1.0, 1.0, 2.0, 2.5]
        assert np.allclose(vals[:, 0], vals[:, 1])

    def test_affine_integral_exact(self):
        path = seq([[0.5]])
        pi = path_intensity(ExactAffine(1.0, 1.0), path)
        total, err = pi.integral(0.0, 1.0)
        assert total == pytest.approx(1.0 * 0.5 + 2.0 * 0.5)
        assert err == 0.0

    def test_birth_left_values(self):
        path = seq([[0.3, 0.7]])
        pi = path_intensity(PiecewiseBirth(AlphaFamily(GeometricSeq(1.0, 2.0))), path)
        vals = pi.left_values(np.array([0.1, 0.5, 0.9]))
        assert vals[:, 0].tolist() == [1.0, 2.0, 4.0]

    def test_constant_integral(self):
        path = seq([[]])
        pi = path_intensity(Constant((2.0,)), path)
        assert pi.integral(0.2, 0.7)[0] == pytest.approx(1.0)


class TestHawkesIntensity:
    def test_exp_kernel_left_values(self):
        path = seq([[0.5]], horizon=2.0)
        hk = Hawkes(links=(AbsLink(),), kernels=((ExpKernel(0.5, 1.0),),))
        pi = path_intensity(hk, path)
        vals = pi.left_values(np.array([0.5, 1.0, 1.5]))
        assert vals[0, 0] == 0.0  # the jump itself is excluded from its own left limit
        assert vals[1, 0] == pytest.approx(0.5 * math.exp(-0.5))
        assert vals[2, 0] == pytest.approx(0.5 * math.exp(-1.0))

    def test_exp_kernel_exact_integral(self):
        path = seq([[0.5]], horizon=2.0)
        hk = Hawkes(links=(AbsLink(),), kernels=((ExpKernel(0.5, 1.0),),))
        pi = path_intensity(hk, path)
        total, err = pi.integral(0.0, 2.0)
        assert total == pytest.approx(0.5 * (1 - math.exp(-1.5)))
        assert err == 0.0

    def test_box_kernel_piecewise(self):
        path = seq([[0.5]], horizon=3.0)
        hk = Hawkes(links=(ReluLink(),), kernels=((BoxKernel(2.0, 1.0),),))
        pi = path_intensity(hk, path)
        total, err = pi.integral(0.0, 3.0)
        assert total == pytest.approx(2.0)
        assert err == 0.0
        vals = pi.left_values(np.array([1.0, 1.5, 1.6]))
        assert vals[:, 0].tolist() == [2.0, 2.0, 0.0]
        breaks = pi.breakpoints(0.0, 3.0)
        assert 1.5 in breaks.tolist()

    def test_clipped_link_quadrature(self):
        path = seq([[0.5]], horizon=2.0)
        hk = Hawkes(links=(ClippedLinearLink(1.0, 0.3),),
                    kernels=((ExpKernel(0.5, 1.0),),))
        pi = path_intensity(hk, path, quadrature_step=0.001)
        total, err = pi.integral(0.5, 2.0)
        # clip at 0.3: intensity is 0.3 until 0.5 e^-(s-0.5) = 0.3, then decays
        t_cross = 0.5 + math.log(0.5 / 0.3)
        exact = 0.3 * (t_cross - 0.5) + 0.5 * (math.exp(-(t_cross - 0.5)) - math.exp(-1.5))
        assert total == pytest.approx(exact, abs=5e-5)
        assert err >= 0.0

    def test_cross_coordinate_influence(self):
        path = seq([[0.4], []], horizon=1.0)
        hk = Hawkes(links=(AbsLink(), AbsLink()),
                    kernels=((None, None), (ExpKernel(1.0, 2.0), None)))
        pi = path_intensity(hk, path)
        vals = pi.left_values(np.array([0.9]))
        assert vals[0, 0] == 0.0
        assert vals[0, 1] == pytest.approx(math.exp(-1.0))


class TestDiffusionIntensity:
    def test_requires_aux(self):
        path = seq([[]])
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=1.0)
        with pytest.raises(MissingAux):
            path_intensity(ou, path)

    def test_deterministic_ou_integral(self):
        # sigma = 0: X_t = e^{-t}, so int_0^1 |X| ds = 1 - e^{-1}
        path = seq([[]])
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=0.0)
        aux = simulate_reset_ou(ou, path, step=0.001, mode="exact",
                                stream=path_stream(1, 0, 1))
        pi = path_intensity(ou, path, aux=aux)
        total, err = pi.integral(0.0, 1.0)
        assert total == pytest.approx(1.0 - math.exp(-1.0), abs=1e-4)
        assert abs(total - (1.0 - math.exp(-1.0))) <= max(err, 1e-6) * 3 + 1e-6

    def test_left_value_at_reset(self):
        path = seq([[0.5]])
        ou = ResetOU(xi=ConstantSeq(1.0), a=ConstantSeq(0.0), b=ConstantSeq(-1.0), sigma=0.0)
        aux = simulate_reset_ou(ou, path, step=0.01, mode="exact",
                                stream=path_stream(1, 0, 1))
        pi = path_intensity(ou, path, aux=aux)
        left = pi.left_values(np.array([0.5]))[0, 0]
        assert left == pytest.approx(math.exp(-0.5))  # pre-reset value
        right_after = pi.left_values(np.array([0.5 + 1e-9]))[0, 0]
        assert right_after == pytest.approx(1.0, abs=1e-6)  # reset to xi_1


class TestQuadratureGrid:
    def test_contains_jumps_and_endpoints(self):
        grid = quadrature_grid(np.array([0.3, 0.7]), 0.0, 1.0, 0.25)
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert 0.3 in grid.tolist() and 0.7 in grid.tolist()
        assert np.all(np.diff(grid) > 0)
        assert np.max(np.diff(grid)) <= 0.25 + 1e-12
