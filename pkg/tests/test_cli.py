"""Command-line interface: artifacts, exit codes, determinism, caching."""

import json

import numpy as np

from hypermass.cli import main
from hypermass.surface import SurfaceSpec

SPHERE_ARGS = ["--preset", "sphere", "--preset-params", '{"R": 1.0}',
               "--hsource", "flat", "--kappa", "1.0",
               "--ntheta", "16", "--npsi", "16", "--steps", "64"]


def run(command, out, extra=()):
    return main([command, *SPHERE_ARGS, "--out", str(out), *extra])


def test_mass_command(tmp_path, capsys):
    rc = run("mass", tmp_path / "m")
    assert rc == 0
    out = capsys.readouterr().out
    assert "future_timelike" in out
    for name in ("embedding.tsv", "u.csv", "w.csv", "mass.csv", "report.txt"):
        assert (tmp_path / "m" / name).exists()
    text = (tmp_path / "m" / "report.txt").read_text()
    assert "P_causal_class = future_timelike" in text
    assert "monotone = true" in text
    assert "config_hash = " in text
    assert "convention_note_0" in text


def test_report_makes_figures(tmp_path):
    rc = run("report", tmp_path / "r")
    assert rc == 0
    for name in ("mass_profile.png", "decay.png", "curvature.png"):
        assert (tmp_path / "r" / name).stat().st_size > 1000


def test_verify_trivial_mass(tmp_path, capsys):
    rc = main(["verify", "--preset", "sphere", "--preset-params",
               '{"R": 1.0}', "--hsource", "h0_fraction:1.0",
               "--ntheta", "16", "--npsi", "16", "--steps", "64",
               "--out", str(tmp_path / "v")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out


def test_embed_command_and_table(tmp_path, capsys):
    rc = run("embed", tmp_path / "e")
    assert rc == 0
    table = (tmp_path / "e" / "embedding.tsv").read_text().splitlines()
    assert table[0].split("\t")[:4] == ["theta", "psi", "x1", "x2"]
    assert len(table) == 1 + 16 * 16


def test_foliate_command(tmp_path):
    rc = run("foliate", tmp_path / "f")
    assert rc == 0
    assert (tmp_path / "f" / "foliation.tsv").exists()


def test_solve_commands(tmp_path):
    assert run("solve-u", tmp_path / "su") == 0
    assert (tmp_path / "su" / "u.csv").exists()
    assert run("solve-w", tmp_path / "sw") == 0
    assert (tmp_path / "sw" / "w.csv").exists()


def test_axisymmetric_strategy_rejects_general_grid(tmp_path, capsys):
    # a genuinely psi-dependent metric with the axisymmetric strategy
    spec = SurfaceSpec.from_preset("sphere", {"R": 1.0}, 16, 16)
    gpp = spec.gpp * (1.0 + 0.02 * np.cos(spec.grid.psi2))
    doc = {"kind": "grid", "kappa": 1.0,
           "grid": {"ntheta": 16, "npsi": 16,
                    "g_tt": spec.gtt.ravel().tolist(),
                    "g_tp": spec.gtp.ravel().tolist(),
                    "g_pp": gpp.ravel().tolist()},
           "hsource": {"type": "riemannian",
                       "H": np.full(256, 2.0).tolist()}}
    path = tmp_path / "surface.json"
    path.write_text(json.dumps(doc))
    rc = main(["embed", "--input", str(path), "--kappa", "1.0",
               "--strategy", "axisymmetric", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_inadmissible_exit_code(tmp_path):
    rc = main(["mass", "--preset", "saddle_band", "--preset-params",
               '{"beta": 0.3334}', "--hsource", "h0_fraction:0.9",
               "--kappa", "0.9", "--ntheta", "64", "--npsi", "8",
               "--steps", "64", "--out", str(tmp_path / "bad")])
    assert rc == 2


def test_io_exit_code(tmp_path):
    rc = main(["mass", "--input", str(tmp_path / "missing.json"),
               "--out", str(tmp_path / "io")])
    assert rc == 4


def test_deterministic_outputs(tmp_path):
    run("mass", tmp_path / "d1")
    run("mass", tmp_path / "d2")
    # second directory recomputed from scratch (no shared cache)
    for name in ("mass.csv", "report.txt", "u.csv", "w.csv", "embedding.tsv"):
        b1 = (tmp_path / "d1" / name).read_bytes()
        b2 = (tmp_path / "d2" / name).read_bytes()
        assert b1 == b2, name


def test_cache_reuse(tmp_path, capsys):
    run("mass", tmp_path / "c")
    capsys.readouterr()
    run("mass", tmp_path / "c")
    out = capsys.readouterr().out
    assert "reusing cached embedding" in out
    assert "reusing cached u_flow" in out


def test_input_file_roundtrip(tmp_path):
    spec = SurfaceSpec.from_preset("spheroid", {"a": 1.0, "c": 0.8}, 16, 16,
                                   hsource={"type": "riemannian", "H": 2.0})
    path = tmp_path / "spheroid.json"
    path.write_text(json.dumps(spec.to_dict()))
    rc = main(["mass", "--input", str(path), "--kappa", "1.0",
               "--steps", "64", "--out", str(tmp_path / "rt")])
    assert rc == 0
    text = (tmp_path / "rt" / "report.txt").read_text()
    assert "P_causal_class = future_timelike" in text


def test_spacetime_source_enters_through_magnitude(tmp_path):
    # (H, trp) = (2.5, 1.5) has sqrt(H^2 - trp^2) = 2: the report must be
    # identical (byte for byte) to the plain Riemannian H = 2 run
    docs = {}
    for tag, hsource in (("riem", {"type": "riemannian",
                                   "H": np.full(256, 2.0).tolist()}),
                         ("st", {"type": "spacetime",
                                 "H": np.full(256, 2.5).tolist(),
                                 "trp": np.full(256, 1.5).tolist()})):
        spec = SurfaceSpec.from_preset("sphere", {"R": 1.0}, 16, 16)
        doc = spec.to_dict()
        doc["hsource"] = hsource
        p = tmp_path / f"{tag}.json"
        p.write_text(json.dumps(doc))
        rc = main(["mass", "--input", str(p), "--kappa", "1.0",
                   "--steps", "64", "--out", str(tmp_path / tag)])
        assert rc == 0
        docs[tag] = (tmp_path / tag / "mass.csv").read_text().splitlines()[1:]
    assert docs["riem"] == docs["st"]
