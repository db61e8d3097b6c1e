import csv
import json
import subprocess
import sys

import pytest

from sociallearn import io as rio
from sociallearn.cli import main, parse_config
from sociallearn.config import RunConfig, merge
from sociallearn.errors import ParameterError, UsageError


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParseConfig:
    def test_simulate_flags(self):
        cfg = parse_config("simulate --family celebrity --epsilon 0.3 --delta 0.1 --trials 200 --seed 7".split())
        assert (cfg.command, cfg.family, cfg.epsilon, cfg.delta, cfg.trials, cfg.seed) == ("simulate", "celebrity", 0.3, 0.1, 200, 7)

    def test_file_with_bad_delta(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"command": "simulate", "delta": 0.6}))
        with pytest.raises(ParameterError, match="delta"):
            parse_config(["simulate", "--config", str(p)])

    def test_flag_wins_over_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"command": "simulate", "delta": 0.2, "trials": 9}))
        cfg = parse_config(["simulate", "--config", str(p), "--delta", "0.3"])
        assert cfg.delta == 0.3 and cfg.trials == 9

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"command": "simulate", "colour": "red"}))
        with pytest.raises(UsageError, match="colour"):
            parse_config(["simulate", "--config", str(p)])

    def test_wrong_type(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"command": "simulate", "trials": "many"}))
        with pytest.raises(UsageError, match="trials"):
            parse_config(["simulate", "--config", str(p)])

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(UsageError):
            parse_config(["simulate", "--config", str(p)])

    def test_round_trip(self, tmp_path):
        cfg = parse_config("verify lemma2 --epsilon 0.2 --j 10 --k 5 --seed 3 --n-values 1,2 --weights 1,2.5".split())
        p = tmp_path / "rt.json"
        p.write_text(cfg.to_json())
        again = parse_config(["verify", "lemma2", "--config", str(p)])
        assert again == cfg
        assert RunConfig.from_dict(json.loads(cfg.to_json())) == cfg

    def test_env_workers(self):
        cfg = merge(None, {"command": "simulate"}, env={"SOCIALLEARN_WORKERS": "3"})
        assert cfg.workers == 3
        cfg = merge(None, {"command": "simulate", "workers": 2}, env={"SOCIALLEARN_WORKERS": "3"})
        assert cfg.workers == 2

    @pytest.mark.parametrize("doc", [
        {"command": "simulate", "epsilon": 0.0},
        {"command": "simulate", "trials": 0},
        {"command": "simulate", "order": "weighted"},
        {"command": "simulate", "n": 3, "fixed_order": [1, 1, 2], "order": "fixed"},
        {"command": "simulate", "prior_one": 0.7},
        {"command": "simulate", "family": "celebrity", "n": 5, "k": 5},
    ])
    def test_constraint_violations(self, doc):
        with pytest.raises(ParameterError):
            RunConfig.from_dict(doc)

    def test_verify_needs_target(self):
        with pytest.raises(UsageError):
            RunConfig.from_dict({"command": "verify"})


class TestExitCodes:
    def test_verify_lemma1(self, capsys):
        code, out, _ = run("verify lemma1 --delta 0.1 --epsilon 0.1 --seed 1".split(), capsys)
        assert code == 0
        assert "N           250" in out or "N  " in out
        rep = None
        code, out, _ = run("verify lemma1 --delta 0.1 --epsilon 0.1 --seed 1 --format json".split(), capsys)
        rep = json.loads(out)
        assert rep["values"]["N"] == 250 and rep["values"]["exact_tail"] > 0.9

    def test_verification_failure_is_one(self, capsys):
        code, _, err = run("verify thm4 --epsilon 0.4 --delta 0.1 --n 3000 --trials 2 --seed 1".split(), capsys)
        assert code == 1
        assert json.loads(err.strip().splitlines()[-1])["error"] == "VerificationFailure"

    def test_inconclusive_is_zero(self, capsys):
        # 300 agents over 2 trials: the mean clears 0.6 but the interval straddles it
        code, out, _ = run("verify thm4 --epsilon 0.4 --delta 0.1 --n 300 --trials 2 --seed 0 --format json".split(), capsys)
        rep = json.loads(out)
        assert rep["passed"] and code == 0
        assert rep["inconclusive"] and rep["values"]["ci_lo"] < 0.6
        code, out, _ = run("verify thm4 --epsilon 0.4 --delta 0.1 --n 300 --trials 2 --seed 0".split(), capsys)
        assert "statistically inconclusive" in out

    def test_parameter_error_is_two(self, capsys):
        code, _, err = run("simulate --family empty --n 5 --delta 0.6".split(), capsys)
        assert code == 2
        assert json.loads(err)["error"] == "ParameterError"

    def test_usage_error_is_two(self, capsys):
        code, _, err = run("simulate --bogus".split(), capsys)
        assert code == 2 and json.loads(err)["error"] == "UsageError"
        code, _, _ = run(["frobnicate"], capsys)
        assert code == 2

    def test_resource_error_is_three(self, capsys):
        code, _, err = run("simulate --family celebrity --epsilon 0.3 --delta 0.1 --max-agents 1000 --seed 1".split(), capsys)
        assert code == 3 and json.loads(err)["error"] == "ResourceError"

    def test_unwritable_path_is_three(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(["simulate", "--family", "empty", "--n", "5", "--seed", "1", "--output", str(blocker / "out.csv")], capsys)
        assert code == 3 and json.loads(err)["error"] == "OutputError"

    def test_policy_error_is_two(self, capsys):
        code, _, err = run("simulate --family empty --n 5 --prior-one 0.7 --seed 1".split(), capsys)
        assert code == 2

    def test_missing_seed_is_printed(self, capsys):
        code, out, err = run("simulate --family empty --n 5 --trials 3".split(), capsys)
        assert code == 0
        seed = int(err.split("using seed")[1])
        code, again, _ = run(f"simulate --family empty --n 5 --trials 3 --seed {seed}".split(), capsys)
        assert again == out

    def test_clamped_epsilon_is_reported(self, capsys):
        code, out, err = run("simulate --epsilon 0.45 --delta 0.1 --n 300 --trials 2 --seed 1".split(), capsys)
        assert code == 0
        assert "clamped to 0.4" in err
        assert out.splitlines()[1].startswith("0.4,")


class TestCommands:
    def test_simulate_csv_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert main(["simulate", "--family", "celebrity", "--epsilon", "0.4", "--delta", "0.1", "--n", "5000", "--trials", "20", "--seed", "7", "-o", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        assert text.startswith("epsilon,delta,n,k,j,trials,mean_fraction,ci_lo,ci_hi,seed\n")
        assert "\r" not in text

    def test_json_and_csv_agree(self, capsys, tmp_path):
        argv = ["simulate", "--family", "clique", "--n", "10", "--delta", "0.2", "--trials", "50", "--seed", "4"]
        main(argv + ["-o", str(tmp_path / "r.csv")])
        main(argv + ["--format", "json", "-o", str(tmp_path / "r.json")])
        row = next(csv.DictReader(open(tmp_path / "r.csv")))
        doc = json.loads((tmp_path / "r.json").read_text())
        for key in ("mean_fraction", "ci_lo", "ci_hi"):
            assert f"{float(row[key]):.12g}" == f"{doc[key]:.12g}"

    def test_trace(self, capsys, tmp_path):
        tr = tmp_path / "t.jsonl"
        assert main(["simulate", "--family", "celebrity", "--n", "12", "--k", "2", "--j", "3", "--trials", "2", "--seed", "1", "--trace", str(tr), "-o", str(tmp_path / "x.csv")]) == 0
        lines = [json.loads(l) for l in tr.read_text().splitlines()]
        assert len(lines) == 12 and lines[0]["t"] == 1
        assert set(lines[0]) == {"t", "agent", "role", "signal", "observed_votes", "action"}

    def test_sweep_and_plot_data(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        plots = tmp_path / "plots"
        assert main(["sweep", "--epsilon", "0.4", "--delta", "0.1", "--n-values", "3000,1000,2000", "--trials", "3", "--seed", "2", "-o", str(out), "--plot-dir", str(plots)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert [int(r["n"]) for r in rows] == [1000, 2000, 3000]
        files = list(plots.iterdir())
        assert len(files) == 1
        lines = files[0].read_text().splitlines()
        assert lines[0] == "x,y" and len(lines) == 4

    def test_weighted_and_fixed_orders(self, capsys):
        code, _, _ = run("simulate --family empty --n 3 --order weighted --weights 1,2,3 --seed 1 --trials 5".split(), capsys)
        assert code == 0
        code, _, _ = run("simulate --family clique --n 3 --order fixed --fixed-order 3,1,2 --seed 1 --trials 5".split(), capsys)
        assert code == 0
        code, _, _ = run("simulate --family empty --n 4 --order weighted --weights 1,2,3 --seed 1".split(), capsys)
        assert code == 2

    def test_adversary(self, capsys):
        code, out, _ = run("adversary --family celebrity --n 5 --k 1 --j 1 --delta 0.3 --seed 0".split(), capsys)
        doc = json.loads(out)
        assert code == 0 and doc["method"] == "exhaustive" and doc["evaluated"] == 120
        assert doc["value"] <= doc["uniform_value"]

    def test_oracle(self, capsys):
        code, out, _ = run("oracle --family clique --n 3 --delta 0.1 --seed 0".split(), capsys)
        doc = json.loads(out)
        entry = [e for e in doc["tables"][2]["entries"] if e["own_signal"] == 0 and e["observed"] == [1, 1]][0]
        assert entry["action"] == 1 and entry["posterior"] == pytest.approx(0.6)

    def test_derandomize(self, capsys):
        code, out, _ = run("derandomize --n 400 --k 5 --j 10 --samples 4 --trials 10 --seed 1".split(), capsys)
        doc = json.loads(out)
        assert code == 0 and doc["best_is_at_least_mean"]

    @pytest.mark.parametrize("argv", [
        "verify lemma2 --epsilon 0.2 --j 10 --k 5 --mc-samples 20000 --seed 0",
        "verify lemma3 --epsilon 0.2 --j 10 --mc-samples 20000 --seed 0",
        "verify cor2 --n 4 --k 1 --delta 0.3 --j 1",
        "verify lem4 --n 4 --k 2 --delta 0.2 --j 1",
        "verify thm5 --n 4 --k 1 --delta 0.2 --j 1",
        "verify thm6 --n 400 --k 5 --j 10 --samples 4 --trials 10 --seed 1",
    ])
    def test_verify_targets(self, argv, capsys):
        code, out, err = run(argv.split(), capsys)
        assert code == 0, err
        assert "PASS" in out

    def test_console_script(self):
        res = subprocess.run([sys.executable, "-m", "sociallearn.cli", "verify", "lemma1", "--delta", "0.1", "--epsilon", "0.1", "--seed", "1", "--format", "json"], capture_output=True, text=True)
        assert res.returncode == 0 and json.loads(res.stdout)["passed"]


class TestEmit:
    def test_header_only(self):
        assert rio.render_csv([]) == "epsilon,delta,n,k,j,trials,mean_fraction,ci_lo,ci_hi,seed\n"

    def test_quoting(self):
        text = rio.render_csv([{"n": 1, "seed": 'a,"b"'}], fields=("n", "seed"))
        assert text == 'n,seed\n1,"a,""b"""\n'

    def test_json_sorted(self):
        assert rio.render_json({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'
