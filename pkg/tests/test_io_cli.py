import textwrap

import numpy as np
import pytest

from tangentllg.cli import main
from tangentllg.config import ConfigError, parse_config, parse_config_string
from tangentllg.mesh import build_box_mesh, write_mesh_native
from tangentllg.output import CSV_HEADER, read_csv, read_vtk, write_vtk

MINIMAL = """
[mesh]
kind = box
nx = 4
ny = 4
nz = 4
[material]
alpha = 1
[scheme]
variant = theta
theta = 0.5
tau = 1e-3
T = 0.1
"""

MACROSPIN = """
[mesh]
nx = 2
ny = 2
nz = 2
[material]
alpha = 1.0
d2 = 0.01
h_ext = 0, 0, 2
[scheme]
variant = order2
tau = 0.01
T = 1.0
rho = zero
M = 1e6
[initial]
kind = uniform
m = 1, 0, 0
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.mesh.shape == (4, 4, 4)
    assert cfg.scheme.variant == "theta" and cfg.scheme.theta == 0.5
    assert cfg.scheme.num_steps == 100
    assert cfg.material.alpha == 1.0 and cfg.material.d2 == 0.0
    assert cfg.stray.mode == "none"
    assert cfg.scheme.krylov_tol == 1e-10 and cfg.scheme.krylov_maxiter == 500
    assert cfg.output.stride == 10


def test_theta_out_of_range(tmp_path):
    with pytest.raises(ConfigError, match="theta"):
        parse_config(write(tmp_path, MINIMAL.replace("theta = 0.5", "theta = 1.5")))


def test_unknown_key_and_section_listed_together(tmp_path):
    text = MINIMAL + "alhpa = 2\n[bogus]\nx = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(write(tmp_path, text))
    msgs = "\n".join(info.value.errors)
    assert "alhpa" in msgs and "[bogus]" in msgs


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match=r"line\s+3"):
        parse_config(write(tmp_path, "[mesh]\nnx = 2\nthis line is broken\n"))


def test_missing_alpha(tmp_path):
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(write(tmp_path, "[mesh]\nnx = 2\n"))


def test_regime_warning_and_strict(tmp_path):
    text = MINIMAL.replace("variant = theta", "variant = order2\nrho = zero\nM = 10").replace("tau = 1e-3", "tau = 1.0")
    cfg = parse_config(write(tmp_path, text))
    assert cfg.warnings and "tau" in cfg.warnings[0]
    with pytest.raises(ConfigError, match="regime"):
        parse_config(write(tmp_path, text), strict=True)
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, text.replace("M = 10", "M = 10\nstrict = true")))


def test_config_file_mesh_and_initial(tmp_path):
    mesh = build_box_mesh(2, 1, 1)
    write_mesh_native(mesh, tmp_path / "m.mesh")
    np.savetxt(tmp_path / "m0.txt", np.tile([0.0, 2.0, 0.0], (mesh.num_vertices, 1)))
    cfg = parse_config(write(tmp_path, """
        [mesh]
        kind = file
        path = m.mesh
        [material]
        alpha = 0.5
        [initial]
        kind = file
        path = m0.txt
    """))
    m = cfg.initial.build(cfg.mesh.build())
    np.testing.assert_allclose(m, np.tile([0, 1.0, 0], (mesh.num_vertices, 1)))


def test_random_initial_seeded():
    cfg = parse_config_string(MINIMAL + "[initial]\nkind = random\nseed = 18446744073709551615\n")
    mesh = cfg.mesh.build()
    a, b = cfg.initial.build(mesh), cfg.initial.build(mesh)
    assert np.array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1, atol=1e-15)


def test_vtk_roundtrip(tmp_path, rng):
    mesh = build_box_mesh(2, 2, 1)
    m = rng.normal(size=(mesh.num_vertices, 3))
    f = tmp_path / "s.vtk"
    write_vtk(f, mesh, {"m": m})
    text = f.read_text()
    assert "DATASET UNSTRUCTURED_GRID" in text and "VECTORS m double" in text
    pts, tets, vecs = read_vtk(f)
    assert np.array_equal(pts, mesh.vertices)
    assert np.array_equal(tets, mesh.tets)
    assert np.array_equal(vecs["m"], m)


def test_cli_run_writes_outputs(tmp_path):
    text = MINIMAL.replace("T = 0.1", "T = 0.005").replace("[material]\nalpha = 1", "[material]\nalpha = 1\nd2 = 1")
    text += "[initial]\nkind = random\nseed = 3\n[output]\ncsv = out.csv\nvtk_dir = snaps\nstride = 2\n"
    cfgfile = write(tmp_path, text)
    assert main(["run", str(cfgfile)]) == 0
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert any(ln.startswith("# seed = 3") for ln in lines)
    assert [ln for ln in lines if not ln.startswith("#")][0] == CSV_HEADER
    data = read_csv(tmp_path / "out.csv")
    assert data.shape == (6, 9)
    assert np.all(np.diff(data[:, 0]) > 0)
    snaps = sorted(p.name for p in (tmp_path / "snaps").iterdir())
    assert snaps == ["m_000000.vtk", "m_000002.vtk", "m_000004.vtk", "m_000005.vtk"]


def test_cli_check_mesh(tmp_path, capsys):
    assert main(["check-mesh", "box:2,2,2"]) == 0
    assert "satisfied" in capsys.readouterr().out
    f = tmp_path / "sliver.mesh"
    f.write_text("tetmesh 1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0.9 0.9 0.05\n0 1 2 3\n")
    assert main(["check-mesh", str(f)]) == 4
    write_mesh_native(build_box_mesh(2, 2, 2), tmp_path / "k.mesh")
    assert main(["check-mesh", str(tmp_path / "k.mesh")]) == 0


def test_cli_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_cli_invalid_config(tmp_path):
    assert main(["run", str(write(tmp_path, MINIMAL.replace("theta = 0.5", "theta = 2")))]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_cli_runtime_failure(tmp_path):
    text = MINIMAL.replace("variant = theta", "variant = order2\nrho = zero\nM = 10").replace(
        "[material]\nalpha = 1", "[material]\nalpha = 0.1\nQ = 10"
    ).replace("tau = 1e-3", "tau = 0.05")
    assert main(["run", str(write(tmp_path, text))]) == 3


def test_cli_macrospin(tmp_path, capsys):
    cfgfile = write(tmp_path, MACROSPIN)
    assert main(["macrospin", str(cfgfile)]) == 0
    assert "max nodal error" in capsys.readouterr().out
    tight = write(tmp_path, MACROSPIN + "[macrospin]\ntol = 1e-9\n", "tight.cfg")
    assert main(["macrospin", str(tight)]) == 4
    bad = write(tmp_path, MACROSPIN.replace("d2 = 0.01", "d2 = 0.01\nQ = 1"), "bad.cfg")
    assert main(["macrospin", str(bad)]) == 2


def test_cli_convergence(tmp_path, capsys):
    text = MACROSPIN + "[convergence]\ntaus = 0.025, 0.0125, 0.00625\nmin_order = 1.8\n"
    assert main(["convergence", str(write(tmp_path, text))]) == 0
    out = capsys.readouterr().out
    assert "order" in out
    text = MACROSPIN + "[convergence]\ntaus = 0.025, 0.0125, 0.00625\nmin_order = 2.5\n"
    assert main(["convergence", str(write(tmp_path, text, "c2.cfg"))]) == 4


def test_cli_demag(tmp_path, capsys):
    text = """
        [mesh]
        nx = 4
        ny = 4
        nz = 4
        [material]
        alpha = 1
        [stray]
        mode = truncated_fem
        padding = 4
        [initial]
        m = 0, 0, 1
        [demag]
        tol = 0.2
    """
    assert main(["demag-test", str(write(tmp_path, text))]) == 0
    assert "volume-averaged" in capsys.readouterr().out
    assert main(["demag-test", str(write(tmp_path, text.replace("tol = 0.2", "tol = 0.01"), "d.cfg"))]) == 4
