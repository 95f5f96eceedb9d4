import json
import os
import subprocess
import sys

from cellfree_pas.cli import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "scenario": "cell_free",
        "seed": 3,
        "alpha_grid": [0.0, 0.6, 1.0],
        "num_drops": 1,
        "ensemble_size": 120,
        "chunk_size": 60,
        "combiner": "mrc",
        "layout": {"num_aps": 6, "num_ues": 4},
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_convergence_writes_expected_files(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["convergence", "--config", cfg]) == 0
    names = sorted(os.listdir(out))
    assert "convergence_trace.csv" in names
    assert "layout_snapshot.json" in names
    assert "certificates.json" in names
    assert "config_snapshot.json" in names
    assert "game_trace_alpha_0p6.csv" in names
    certs = json.loads((out / "certificates.json").read_text())
    assert all(c["is_epsilon_nash"] for c in certs.values())
    header = (out / "game_trace_alpha_0p6.csv").read_text().splitlines()[0]
    assert header == "iteration,ue_id,rho,xi,mu,u,total_power_mW,messages"


def test_convergence_trace_monotone_under_sequential_schedule(tmp_path):
    cfg = write_config(tmp_path, alpha_grid=[0.0, 0.5, 1.0])
    assert main(["convergence", "--config", cfg]) == 0
    rows = (tmp_path / "out" / "convergence_trace.csv").read_text().splitlines()
    header = rows[0].split(",")
    i_alpha = header.index("alpha")
    i_power = header.index("total_power_mW")
    i_u = header.index("u")
    per_alpha = {}
    for line in rows[1:]:
        cells = line.split(",")
        per_alpha.setdefault(cells[i_alpha], []).append(
            (float(cells[i_power]), float(cells[i_u])))
    assert len(per_alpha) == 3
    for series in per_alpha.values():
        powers = [p for p, _ in series]
        potentials = [u for _, u in series]
        assert powers == sorted(powers, reverse=True)
        assert potentials == sorted(potentials, reverse=True)


def test_convergence_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["convergence", "--config", cfg, "--out",
                 str(tmp_path / "o1")]) == 0
    assert main(["convergence", "--config", cfg, "--out",
                 str(tmp_path / "o2")]) == 0
    a = read_bytes(tmp_path / "o1" / "convergence_trace.csv")
    assert a == read_bytes(tmp_path / "o2" / "convergence_trace.csv")
    assert a  # nonempty


def test_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path)
    main(["convergence", "--config", cfg, "--out", str(tmp_path / "s3")])
    main(["convergence", "--config", cfg, "--seed", "4", "--out",
          str(tmp_path / "s4")])
    assert read_bytes(tmp_path / "s3" / "layout_snapshot.json") != \
        read_bytes(tmp_path / "s4" / "layout_snapshot.json")


def test_metrics_vs_k_and_tradeoff_commands(tmp_path):
    cfg = write_config(tmp_path, k_grid=[3, 4])
    assert main(["metrics-vs-k", "--config", cfg]) == 0
    out = tmp_path / "out"
    assert (out / "metrics_vs_k.csv").exists()
    assert (out / "best_vs_k.csv").exists()
    rows = (out / "metrics_vs_k.csv").read_text().splitlines()
    assert rows[0].startswith("num_ues,strategy,alpha")
    assert len(rows) == 1 + 2 * 4   # two K values, greedy + 3 alphas each

    assert main(["tradeoff", "--config", cfg, "--format", "json"]) == 0
    table = json.loads((out / "tradeoff.json").read_text())
    assert [r["alpha"] for r in table] == [0.0, 0.6, 1.0]


def test_nonconverged_run_sets_exit_code(tmp_path):
    cfg = write_config(
        tmp_path,
        alpha_grid=[0.05],
        layout={"num_aps": 2, "num_ues": 2, "antennas_per_ap": 2},
        game={"schedule": "simultaneous", "max_iterations": 30,
              "initial_power_rule": "fraction", "initial_power_divisor": 100.0},
    )
    assert main(["convergence", "--config", cfg]) == 1
    assert main(["convergence", "--config", cfg, "--allow-nonconverged"]) == 0


def test_oscillation_config_via_subprocess():
    cfg = os.path.join(CONFIG_DIR, "oscillation_k2.json")
    out = subprocess.run(
        [sys.executable, "-m", "cellfree_pas", "convergence", "--config", cfg,
         "--out", "/tmp/cfpas_osc_test"],
        capture_output=True, text=True, timeout=120,
    )
    assert out.returncode == 1
    assert "did not converge" in out.stderr


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["convergence", "--config", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    assert main(["convergence", "--config", str(missing)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"scenario": "mesh"}))
    assert main(["convergence", "--config", str(unknown)]) == 2
