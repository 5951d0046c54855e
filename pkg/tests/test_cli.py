import csv
import filecmp

import numpy as np
import pytest

from selsim.cli import main
from selsim.snapshot import list_snapshots, read_snapshot

SMALL = """
[grid]
n = 16
[time]
dt = {dt}
t_end = {t_end}
snapshot_every = {every}
[mollifier]
sigma = 0.3
[noise]
seed = 4
amplitude = {amp}
enabled = {noise}
[init]
velocity_preset = "{vel}"
director_preset = "{dir}"
"""


def config(tmp_path, name="run.toml", dt=0.01, t_end=0.05, every=0.01, amp=10.0, noise="true",
           vel="taylor-green", dir="quenched"):
    p = tmp_path / name
    p.write_text(SMALL.format(dt=dt, t_end=t_end, every=every, amp=amp, noise=noise, vel=vel, dir=dir))
    return p


def read_rows(path):
    with open(path) as fh:
        return {(r["section"], r["name"]): r for r in csv.DictReader(fh)}


def test_simulate_writes_snapshots_and_ledger(tmp_path):
    out = tmp_path / "a"
    assert main(["simulate", "--config", str(config(tmp_path, every=0.02)), "--out", str(out)]) == 0
    steps = [read_snapshot(p).step for p in list_snapshots(out)]
    # cadence of two steps, plus the final state
    assert steps == [0, 2, 4, 5]
    lines = (out / "energy.csv").read_text().splitlines()
    assert len(lines) == 1 + 6
    assert (out / "config.toml").exists()


def test_t_end_zero_gives_initial_snapshot_only(tmp_path):
    out = tmp_path / "a"
    assert main(["simulate", "--config", str(config(tmp_path, t_end=0.0)), "--out", str(out)]) == 0
    snaps = list_snapshots(out)
    assert len(snaps) == 1 and read_snapshot(snaps[0]).t == 0.0


def test_equilibrium_without_noise_is_unchanged(tmp_path):
    out = tmp_path / "a"
    cfg = config(tmp_path, noise="false", vel="zero", dir="uniform", t_end=0.1, every=0.1)
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    first, last = (read_snapshot(p) for p in list_snapshots(out))
    assert last.t == pytest.approx(0.1)
    for name in ("v", "d", "z"):
        np.testing.assert_allclose(last.fields[name], first.fields[name], atol=1e-12, rtol=0)


def test_simulate_is_deterministic(tmp_path):
    cfg = config(tmp_path)
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.left_only and not cmp.right_only
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", cmp.common_files, shallow=False)
    assert not mismatch and not errors


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid]\nn = 7\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "grid.n" in capsys.readouterr().err
    blow = tmp_path / "blow.toml"
    blow.write_text("[grid]\nn = 16\n[time]\ndt = 0.5\nt_end = 5.0\nsnapshot_every = 0.5\n"
                    "[init]\nvelocity_amplitude = 1000.0\n")
    assert main(["simulate", "--config", str(blow), "--out", str(tmp_path / "y")]) == 3
    assert (tmp_path / "y" / "energy.csv").exists()
    assert main(["diagnose", "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "d.csv")]) == 4
    assert main(["scan", "--in", str(tmp_path / "y"), "--eps0", "-1", "--out", str(tmp_path / "s")]) == 2


def test_single_snapshot_dir_is_an_error(tmp_path, capsys):
    out = tmp_path / "a"
    main(["simulate", "--config", str(config(tmp_path, t_end=0.0)), "--out", str(out)])
    assert main(["diagnose", "--in", str(out), "--out", str(tmp_path / "d.csv")]) == 4
    assert "at least 2 snapshots" in capsys.readouterr().err


def test_corrupt_snapshot_is_named(tmp_path, capsys):
    out = tmp_path / "a"
    main(["simulate", "--config", str(config(tmp_path)), "--out", str(out)])
    victim = list_snapshots(out)[1]
    data = bytearray(victim.read_bytes())
    data[-3] ^= 0xFF
    victim.write_bytes(bytes(data))
    assert main(["scan", "--in", str(out), "--out", str(tmp_path / "s")]) == 4
    assert victim.name in capsys.readouterr().err


def test_diagnose_zero_fields_report_zero(tmp_path, zero_run):
    run = zero_run()
    bumps = tmp_path / "b.toml"
    bumps.write_text("[[bump]]\ncenter = [1.0, 2.0, 3.0]\nt0 = 0.125\nrho = 1.0\ntau = 0.1\n")
    out = tmp_path / "d.csv"
    assert main(["diagnose", "--in", str(run), "--bumps", str(bumps), "--out", str(out)]) == 0
    rows = read_rows(out)
    numeric = [float(r["value"]) for r in rows.values() if r["value"] not in ("pass", "fail")]
    assert numeric and all(x == 0.0 for x in numeric)


def test_diagnose_refinement_pair(tmp_path):
    coarse, fine = tmp_path / "c", tmp_path / "f"
    main(["simulate", "--config", str(config(tmp_path, "c.toml", dt=0.004, t_end=0.04, every=0.004)),
          "--out", str(coarse)])
    main(["simulate", "--config", str(config(tmp_path, "f.toml", dt=0.002, t_end=0.04, every=0.002)),
          "--out", str(fine)])
    bumps = tmp_path / "b.toml"
    bumps.write_text("[[bump]]\ncenter = [3.0, 3.0, 3.0]\nt0 = 0.02\nrho = 2.0\ntau = 0.018\n")
    out = tmp_path / "d.csv"
    assert main(["diagnose", "--in", str(fine), "--bumps", str(bumps), "--ref", str(coarse),
                 "--out", str(out)]) == 0
    rows = read_rows(out)
    assert float(rows[("refinement", "residual_ratio")]["value"]) >= 1.8
    assert rows[("refinement", "ratio_at_least_1.8")]["value"] == "pass"
    assert float(rows[("global", "integrated_relative_residual")]["value"]) < 1e-3
    assert abs(float(rows[("local", "bump0.normalized_residual")]["value"])) < 1e-2
    assert ("psi", "ratio") in rows


def test_bad_bump_file(tmp_path, zero_run):
    bumps = tmp_path / "b.toml"
    bumps.write_text("[[bump]]\ncenter = [1.0, 2.0]\nt0 = 0.1\n")
    assert main(["diagnose", "--in", str(zero_run()), "--bumps", str(bumps), "--out", str(tmp_path / "d")]) == 4


def test_scan_zero_fields_all_regular(tmp_path, zero_run):
    out = tmp_path / "s"
    assert main(["scan", "--in", str(zero_run()), "--out", str(out)]) == 0
    with open(out / "regularity.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64 and all(r["classification"] == "regular-certified" for r in rows)
    assert (out / "cover.csv").read_text().splitlines()[-1].endswith("pass")


def test_scan_hotspot_fixture(tmp_path, hotspot_run):
    out = tmp_path / "s"
    assert main(["scan", "--in", str(hotspot_run()), "--eps0", "0.05", "--eps1", "0.1", "--M", "10",
                 "--out", str(out)]) == 0
    with open(out / "regularity.csv") as fh:
        rows = list(csv.DictReader(fh))
    unresolved = [r for r in rows if r["classification"] == "unresolved"]
    assert len(unresolved) == 1
    assert [float(unresolved[0][k]) for k in ("x0", "y0", "z0")] == pytest.approx([np.pi] * 3)
    lines = (out / "cover.csv").read_text().splitlines()
    assert len(lines) == 1 + 1 + 1 + 2  # header, one cylinder, blank, summary
    assert lines[-1].endswith("pass")


def test_noise_stats_single_mode(tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text("[grid]\nn = 16\n[noise]\nwavevectors = [[1, 0, 0]]\nseed = 5\n")
    out = tmp_path / "n.csv"
    assert main(["noise-stats", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out)
    emp = float(rows[("variance", "lam=1.empirical")]["value"])
    se = float(rows[("variance", "lam=1.empirical")]["stderr"])
    closed = float(rows[("variance", "lam=1.closed_form")]["value"])
    # gamma = 1 at |k| = 1, so the closed form is 1 / (2 * 1)
    assert closed == 0.5
    assert abs(emp - closed) < 4 * se
    assert 0.45 <= float(rows[("holder", "slope")]["value"]) <= 0.55
    assert float(rows[("supnorm", "sup_linf")]["value"]) > 0


def test_noise_stats_trace_zero(tmp_path):
    cfg = tmp_path / "off.toml"
    cfg.write_text("[grid]\nn = 16\n[noise]\nkmax = 1\nenabled = false\n")
    out = tmp_path / "n.csv"
    assert main(["noise-stats", "--config", str(cfg), "--out", str(out), "--samples", "200"]) == 0
    rows = read_rows(out)
    assert np.isnan(float(rows[("holder", "slope")]["value"]))
    for key, r in rows.items():
        if key[0] in ("variance", "supnorm") and not key[1].endswith("coordinates"):
            assert float(r["value"]) == 0.0
    assert float(rows[("model", "trace")]["value"]) == 0.0
