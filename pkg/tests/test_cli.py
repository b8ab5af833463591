import json
import subprocess
import sys

import numpy as np
import pytest

from grembed import cli
from grembed.fixtures import cycles_and_paths, karate_club, two_layer_graphs
from grembed.graph import export_edge_list


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    g, labels = karate_club()
    export_edge_list(g, str(root / "karate.edges"))
    with open(root / "karate.labels", "w") as fh:
        for i, nid in enumerate(g.node_ids):
            fh.write(f"{nid}\t{labels[i]}\n")
    with open(root / "toy.graphs", "w") as fh:
        for i, (sg, lab) in enumerate(cycles_and_paths(10, 5, 7, seed=0)):
            fh.write(f"#graph g{i} {lab}\n")
            for (u, v) in sg.edge_pairs:
                fh.write(f"{sg.node_ids[int(u)]}\t{sg.node_ids[int(v)]}\n")
            fh.write("\n")
    a, b = two_layer_graphs(n=10, seed=1)
    export_edge_list(a, str(root / "la.edges"))
    export_edge_list(b, str(root / "lb.edges"))
    return root


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def report_dict(text):
    lines = text.strip().splitlines()
    assert lines[0] == "#version 1"
    out = {}
    for line in lines[1:]:
        key, _, value = line.partition("\t")
        out[key] = value
    return out


def test_embed_writes_table_and_report(data_dir, tmp_path, capsys):
    out = tmp_path / "z.tsv"
    code, stdout, _ = run_cli(
        capsys, "embed", "--method", "deepwalk",
        "--input", str(data_dir / "karate.edges"),
        "--dim", "16", "--seed", "7", "--epochs", "1", "--out", str(out))
    assert code == 0
    rep = report_dict(stdout)
    assert rep["task"] == "embed"
    assert rep["dim"] == "16"
    assert rep["node_count"] == "34"
    header = out.read_text().splitlines()[0]
    assert header == "node_id\t16"


def test_embed_rerun_is_byte_identical(data_dir, tmp_path, capsys):
    outs = []
    reports = []
    for name in ("a.tsv", "b.tsv"):
        path = tmp_path / name
        code, stdout, _ = run_cli(
            capsys, "embed", "--method", "deepwalk",
            "--input", str(data_dir / "karate.edges"),
            "--dim", "8", "--seed", "7", "--epochs", "2",
            "--out", str(path))
        assert code == 0
        outs.append(path.read_bytes())
        reports.append(stdout.replace(name, "OUT"))
    assert outs[0] == outs[1]
    assert reports[0] == reports[1]


def test_unknown_flag_exits_2(data_dir, capsys):
    code, _, err = run_cli(capsys, "embed", "--bogus-flag", "1")
    assert code == 2
    assert "usage" in err


def test_missing_input_exits_2_with_path(tmp_path, capsys):
    code, _, err = run_cli(capsys, "embed", "--input",
                           str(tmp_path / "nope.edges"), "--out", "x.tsv")
    assert code == 2
    assert "nope.edges" in err


def test_unknown_method_exits_2(data_dir, tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "embed", "--method", "word2vec",
        "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z.tsv"))
    assert code == 2
    assert "word2vec" in err


def test_no_subcommand_exits_2(capsys):
    code, _, _ = run_cli(capsys)
    assert code == 2


def test_config_file_fills_defaults_flags_win(data_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dim": 6, "epochs": 1}))
    code, stdout, _ = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z1.tsv"), "--config", str(cfg))
    assert code == 0
    assert report_dict(stdout)["dim"] == "6"

    code, stdout, _ = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z2.tsv"), "--config", str(cfg),
        "--dim", "4")
    assert code == 0
    assert report_dict(stdout)["dim"] == "4"


def test_config_file_unknown_key_exits_2(data_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dimme": 6}))
    code, _, err = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z.tsv"), "--config", str(cfg))
    assert code == 2
    assert "dimme" in err


def test_env_seed_fallback_and_priority(data_dir, tmp_path, capsys,
                                        monkeypatch):
    monkeypatch.setenv("GREMBED_SEED", "99")
    code, stdout, _ = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--epochs", "1", "--out", str(tmp_path / "z.tsv"))
    assert code == 0
    assert report_dict(stdout)["config.seed"] == "99"

    code, stdout, _ = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--epochs", "1", "--seed", "3", "--out", str(tmp_path / "z2.tsv"))
    assert code == 0
    assert report_dict(stdout)["config.seed"] == "3"


def test_env_seed_garbage_exits_2(data_dir, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GREMBED_SEED", "oops")
    code, _, err = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z.tsv"))
    assert code == 2
    assert "GREMBED_SEED" in err


def test_deterministic_multiworker_exits_2(data_dir, tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--out", str(tmp_path / "z.tsv"), "--workers", "4")
    assert code == 2
    assert "worker" in err


def test_walk_dumps_corpus(data_dir, tmp_path, capsys):
    out = tmp_path / "walks.txt"
    code, stdout, _ = run_cli(
        capsys, "walk", "--input", str(data_dir / "karate.edges"),
        "--kind", "node2vec", "--q", "0.5", "--length", "8",
        "--walks-per-node", "2", "--seed", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 34 * 2
    assert report_dict(stdout)["walk_count"] == str(34 * 2)
    # a length-8 walk takes 8 steps, so each line lists 9 node ids
    assert all(len(line.split()) == 9 for line in lines)


def test_walk_metapath_needs_types(data_dir, tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "walk", "--input", str(data_dir / "karate.edges"),
        "--kind", "metapath", "--out", str(tmp_path / "w.txt"))
    assert code == 2
    assert "types" in err


def test_roles_graphwave_writes_signatures(data_dir, tmp_path, capsys):
    out = tmp_path / "sigs.tsv"
    code, stdout, _ = run_cli(
        capsys, "roles", "--input", str(data_dir / "karate.edges"),
        "--mode", "graphwave", "--t-points", "10", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 34  # one row per node, no header
    assert all(len(line.split("\t")) == 21 for line in lines)
    assert report_dict(stdout)["signature_dim"] == "20"


def test_roles_struc2vec_writes_embedding(data_dir, tmp_path, capsys):
    out = tmp_path / "sv.tsv"
    code, _, _ = run_cli(
        capsys, "roles", "--input", str(data_dir / "karate.edges"),
        "--mode", "struc2vec", "--dim", "4", "--epochs", "1",
        "--walks-per-node", "2", "--k-max", "2", "--out", str(out))
    assert code == 0
    assert out.read_text().splitlines()[0] == "node_id\t4"


def test_subgraph_reports_accuracy(data_dir, tmp_path, capsys):
    preds = tmp_path / "preds.tsv"
    code, stdout, _ = run_cli(
        capsys, "subgraph", "--dataset", str(data_dir / "toy.graphs"),
        "--epochs", "30", "--seed", "1", "--out", str(preds))
    assert code == 0
    rep = report_dict(stdout)
    assert float(rep["train_accuracy"]) > 0.5
    rows = preds.read_text().strip().splitlines()
    assert rows[0] == "graph_id\tpredicted\tlabel"
    assert len(rows) == 11


def test_eval_nodes_per_seed_mean_matches(data_dir, tmp_path, capsys):
    z = tmp_path / "z.tsv"
    code, _, _ = run_cli(
        capsys, "embed", "--method", "deepwalk",
        "--input", str(data_dir / "karate.edges"),
        "--dim", "8", "--seed", "7", "--epochs", "2", "--out", str(z))
    assert code == 0
    code, stdout, _ = run_cli(
        capsys, "eval-nodes", "--embedding", str(z),
        "--labels", str(data_dir / "karate.labels"),
        "--eval-seeds", "3", "--epochs", "60")
    assert code == 0
    rep = report_dict(stdout)
    per_seed = [float(v) for v in rep["per_seed.accuracy"].split(",")]
    assert len(per_seed) == 3
    assert np.isclose(np.mean(per_seed), float(rep["accuracy_mean"]))


def test_eval_links_reports_auc(data_dir, capsys):
    code, stdout, _ = run_cli(
        capsys, "eval-links", "--input", str(data_dir / "karate.edges"),
        "--method", "line1", "--epochs", "1", "--eval-seeds", "2",
        "--seed", "0")
    assert code == 0
    rep = report_dict(stdout)
    assert 0.0 <= float(rep["auc_mean"]) <= 1.0
    assert len(rep["per_seed.auc"].split(",")) == 2


def test_eval_cluster_reports_nmi(data_dir, tmp_path, capsys):
    z = tmp_path / "z.tsv"
    run_cli(capsys, "embed", "--method", "laplacian_eigenmaps",
            "--input", str(data_dir / "karate.edges"),
            "--dim", "4", "--seed", "0", "--out", str(z))
    code, stdout, _ = run_cli(
        capsys, "eval-cluster", "--embedding", str(z),
        "--labels", str(data_dir / "karate.labels"), "--k", "2")
    assert code == 0
    assert "nmi" in report_dict(stdout)


def test_project_writes_components(data_dir, tmp_path, capsys):
    z = tmp_path / "z.tsv"
    run_cli(capsys, "embed", "--method", "hope",
            "--input", str(data_dir / "karate.edges"),
            "--dim", "6", "--seed", "0", "--out", str(z))
    out = tmp_path / "proj.tsv"
    code, _, _ = run_cli(capsys, "project", "--embedding", str(z),
                         "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "node_id\tpc1\tpc2"
    assert len(lines) == 35


def test_harp_runs(data_dir, tmp_path, capsys):
    out = tmp_path / "zh.tsv"
    code, stdout, _ = run_cli(
        capsys, "harp", "--input", str(data_dir / "karate.edges"),
        "--base", "deepwalk", "--levels", "1", "--epochs", "1",
        "--seed", "0", "--out", str(out))
    assert code == 0
    assert report_dict(stdout)["levels"] == "1"
    assert out.exists()


def test_ohmnet_writes_layer_tables(data_dir, tmp_path, capsys):
    prefix = str(tmp_path / "oh_")
    code, stdout, _ = run_cli(
        capsys, "ohmnet",
        "--layer", f"A={data_dir / 'la.edges'}",
        "--layer", f"B={data_dir / 'lb.edges'}",
        "--lam", "0.5", "--epochs", "1", "--seed", "0",
        "--out-prefix", prefix)
    assert code == 0
    rep = report_dict(stdout)
    assert rep["layer_count"] == "2"
    assert float(rep["inter_layer_gap"]) >= 0
    assert (tmp_path / "oh_A.tsv").exists()
    assert (tmp_path / "oh_B.tsv").exists()


def test_ohmnet_rejects_bad_layer_spec(data_dir, capsys):
    code, _, err = run_cli(capsys, "ohmnet", "--layer", "nopath",
                           "--out-prefix", "x")
    assert code == 2
    assert "NAME=PATH" in err

    code, _, err = run_cli(
        capsys, "ohmnet",
        "--layer", f"A={data_dir / 'la.edges'}",
        "--layer", f"A={data_dir / 'lb.edges'}",
        "--out-prefix", "x")
    assert code == 2
    assert "duplicate" in err


def test_report_file_matches_stdout(data_dir, tmp_path, capsys):
    rep_file = tmp_path / "report.txt"
    code, stdout, _ = run_cli(
        capsys, "embed", "--input", str(data_dir / "karate.edges"),
        "--epochs", "1", "--seed", "1", "--out", str(tmp_path / "z.tsv"),
        "--report", str(rep_file))
    assert code == 0
    assert rep_file.read_text() == stdout


def test_console_entry_byte_identical(data_dir, tmp_path):
    cmd = [sys.executable, "-m", "grembed.cli", "embed",
           "--method", "deepwalk", "--input", str(data_dir / "karate.edges"),
           "--dim", "8", "--seed", "7", "--epochs", "1"]
    r1 = subprocess.run(cmd + ["--out", str(tmp_path / "z1.tsv")],
                        capture_output=True, text=True)
    r2 = subprocess.run(cmd + ["--out", str(tmp_path / "z2.tsv")],
                        capture_output=True, text=True)
    assert r1.returncode == 0 and r2.returncode == 0
    assert (tmp_path / "z1.tsv").read_bytes() == \
        (tmp_path / "z2.tsv").read_bytes()


def test_console_entry_error_codes(tmp_path):
    r = subprocess.run([sys.executable, "-m", "grembed.cli"],
                       capture_output=True, text=True)
    assert r.returncode == 2
    r = subprocess.run(
        [sys.executable, "-m", "grembed.cli", "embed", "--input",
         str(tmp_path / "ghost.edges"), "--out", str(tmp_path / "z.tsv")],
        capture_output=True, text=True)
    assert r.returncode == 2
    assert "ghost.edges" in r.stderr
