import os
import stat
import sys
import textwrap

import numpy as np
import pytest

from nn3d import (
    ANY_SIGMA,
    ConfigError,
    ContinuousGrid,
    DenoiseRequest,
    DenoiserSpec,
    DimensionError,
    DiscreteGrid,
    ExternalDenoiser,
    ExternalDenoiserError,
    PRESET_GRIDS,
    denoise,
    external_denoise,
    get_spec,
    load_plane,
    mse,
    register_denoiser,
    save_plane,
)
from nn3d.denoisers import builtin_dct8, builtin_gauss, builtin_identity

from conftest import seeded_plane
from oracles import dct8_reference


class TestGrids:
    def test_continuous_requires_lo_lt_hi(self):
        with pytest.raises(ConfigError):
            ContinuousGrid(5.0, 5.0)

    def test_discrete_requires_increasing(self):
        with pytest.raises(ConfigError):
            DiscreteGrid((10.0, 10.0))
        with pytest.raises(ConfigError):
            DiscreteGrid(())

    def test_presets(self):
        assert PRESET_GRIDS["dncnn"].values == tuple(float(v) for v in range(5, 80, 5))
        assert PRESET_GRIDS["wdncnn"].values == (15.0, 30.0, 50.0)
        assert PRESET_GRIDS["ffdnet"] == ContinuousGrid(0.0, 75.0)

    def test_request_sigma_nonnegative(self):
        with pytest.raises(ConfigError):
            DenoiseRequest(input=np.zeros((4, 4)), sigma=-1.0)


class TestDispatch:
    def test_identity(self):
        plane = seeded_plane((16, 16), seed=1)
        out = denoise(get_spec("identity"), DenoiseRequest(input=plane, sigma=50.0))
        assert np.array_equal(out, plane)

    def test_discrete_grid_membership_enforced(self):
        spec = register_denoiser(
            DenoiserSpec("five-only", DiscreteGrid((5.0,))), builtin_identity
        )
        denoise(spec, DenoiseRequest(input=np.zeros((4, 4)), sigma=5.0))
        with pytest.raises(ConfigError):
            denoise(spec, DenoiseRequest(input=np.zeros((4, 4)), sigma=7.0))

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            get_spec("no-such-denoiser")

    def test_dimension_preserved_and_finite(self):
        plane = seeded_plane((31, 17), seed=2)
        for name in ("identity", "gauss", "dct8"):
            out = denoise(get_spec(name), DenoiseRequest(input=plane, sigma=20.0))
            assert out.shape == plane.shape
            assert np.isfinite(out).all()


class TestBuiltins:
    @pytest.mark.parametrize("name", ["identity", "gauss", "dct8"])
    def test_constant_preserved(self, name):
        plane = np.full((32, 32), 77.0)
        out = denoise(get_spec(name), DenoiseRequest(input=plane, sigma=25.0))
        assert np.abs(out - 77.0).max() < 1e-9

    def test_gauss_zero_sigma_identity(self):
        plane = seeded_plane((16, 16), seed=3)
        assert np.array_equal(builtin_gauss(plane, 0.0), plane)

    def test_gauss_smooths(self):
        plane = seeded_plane((64, 64), seed=4)
        out = builtin_gauss(plane, 50.0)
        assert np.std(out) < np.std(plane)

    def test_dct8_zero_sigma_near_identity(self):
        plane = seeded_plane((48, 48), seed=5)
        out = builtin_dct8(plane, 0.0)
        assert np.abs(out - plane).max() < 1e-9

    def test_dct8_improves_noisy_constant(self):
        clean = np.full((64, 64), 128.0)
        rng = np.random.Generator(np.random.PCG64(6))
        noisy = clean + 25.0 * rng.standard_normal(clean.shape)
        out = builtin_dct8(noisy, 25.0)
        assert mse(clean, out) < mse(clean, noisy)

    def test_dct8_matches_reference_bit_exactly(self):
        ramp = np.tile(np.floor(np.arange(64) * 4.0), (64, 1))
        rng = np.random.Generator(np.random.PCG64(7))
        noisy = ramp + 25.0 * rng.standard_normal(ramp.shape)
        assert np.array_equal(builtin_dct8(noisy, 25.0), dct8_reference(noisy, 25.0))


IDENTITY_SCRIPT = textwrap.dedent(
    """\
    #!/usr/bin/env python3
    import shutil, sys
    shutil.copyfile(sys.argv[1], sys.argv[2])
    """
)

FAILING_SCRIPT = textwrap.dedent(
    """\
    #!/usr/bin/env python3
    import sys
    print("boom: bad weights", file=sys.stderr)
    sys.exit(3)
    """
)

WRONG_DIMS_SCRIPT = textwrap.dedent(
    """\
    #!/usr/bin/env python3
    import struct, sys
    payload = struct.pack("<8sII", b"NN3DPF01", 2, 2) + struct.pack("<4f", 0, 0, 0, 0)
    open(sys.argv[2], "wb").write(payload)
    """
)


def write_script(path, body):
    path.write_text(body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return [sys.executable, str(path)]


class TestExternalProtocol:
    def test_identity_subprocess_roundtrip(self, tmp_path):
        cmd = write_script(tmp_path / "ident.py", IDENTITY_SCRIPT)
        plane = seeded_plane((24, 24), seed=8).astype(np.float32).astype(np.float64)
        req = DenoiseRequest(input=plane, sigma=12.5)
        out = external_denoise(cmd, req, tmp_path / "work")
        assert np.array_equal(out, plane)

    def test_sigma_formatting_six_significant_digits(self, tmp_path):
        script = tmp_path / "argdump.py"
        cmd = write_script(
            script,
            IDENTITY_SCRIPT + "open(sys.argv[2] + '.sigma', 'w').write(sys.argv[3])\n",
        )
        req = DenoiseRequest(input=np.zeros((4, 4)), sigma=37.5 * (35.0 / 37.5))
        external_denoise(cmd, req, tmp_path / "w")
        assert (tmp_path / "w" / "out.npf.sigma").read_text() == "35"

    def test_nonzero_exit_carries_stderr(self, tmp_path):
        cmd = write_script(tmp_path / "fail.py", FAILING_SCRIPT)
        req = DenoiseRequest(input=np.zeros((4, 4)), sigma=5.0)
        with pytest.raises(ExternalDenoiserError) as info:
            external_denoise(cmd, req, tmp_path / "w")
        assert "boom: bad weights" in info.value.stderr

    def test_wrong_dimensions_rejected(self, tmp_path):
        cmd = write_script(tmp_path / "wrong.py", WRONG_DIMS_SCRIPT)
        req = DenoiseRequest(input=np.zeros((4, 4)), sigma=5.0)
        with pytest.raises(DimensionError):
            external_denoise(cmd, req, tmp_path / "w")

    def test_missing_output_rejected(self, tmp_path):
        cmd = write_script(tmp_path / "noop.py", "#!/usr/bin/env python3\n")
        req = DenoiseRequest(input=np.zeros((4, 4)), sigma=5.0)
        with pytest.raises(ExternalDenoiserError):
            external_denoise(cmd, req, tmp_path / "w")

    def test_timeout(self, tmp_path):
        cmd = write_script(
            tmp_path / "slow.py", "#!/usr/bin/env python3\nimport time\ntime.sleep(5)\n"
        )
        req = DenoiseRequest(input=np.zeros((4, 4)), sigma=5.0)
        with pytest.raises(ExternalDenoiserError, match="timed out"):
            external_denoise(cmd, req, tmp_path / "w", timeout=0.5)

    def test_registered_external_denoiser(self, tmp_path):
        cmd = write_script(tmp_path / "ident.py", IDENTITY_SCRIPT)
        ext = ExternalDenoiser(cmd, grid=ANY_SIGMA, name="ext-test",
                               workdir=tmp_path / "w")
        spec = ext.register()
        plane = seeded_plane((16, 16), seed=9).astype(np.float32).astype(np.float64)
        out = denoise(spec, DenoiseRequest(input=plane, sigma=10.0))
        assert np.array_equal(out, plane)

    def test_exchange_files_are_plane_format(self, tmp_path):
        cmd = write_script(tmp_path / "ident.py", IDENTITY_SCRIPT)
        work = tmp_path / "w"
        plane = np.arange(16, dtype=np.float64).reshape(4, 4)
        external_denoise(cmd, DenoiseRequest(input=plane, sigma=1.0), work)
        assert np.array_equal(load_plane(work / "in.npf"), plane)
        assert np.array_equal(load_plane(work / "out.npf"), plane)
