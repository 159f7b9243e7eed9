import pandas as pd
import pytest

from binomial_car.cli.main import main
from binomial_car.database.Database import ResultsStore, config_hash, read_metadata, write_results
from binomial_car.errors import InputError, OutputError
from binomial_car.io.Config import RunConfig, load_config
from binomial_car.io.IO import IO

from .conftest import adjacency_text

HEADER = "region_id,stratum,n,y\n"
QUICK = ["--iterations", "600", "--burn-in", "200", "--thin", "2", "--seed", "4"]


@pytest.fixture
def lattice_files(tmp_path, small_graph):
    events = [3, 4, 2, 5, 3, 4, 2, 3, 6]
    rows = "".join(f"{rid},all,40,{y}\n" for rid, y in zip(small_graph.region_ids, events))
    rows += "".join(f"{rid},other,30,{y % 4}\n" for rid, y in zip(small_graph.region_ids, events))
    counts = tmp_path / "counts.csv"
    counts.write_text(HEADER + rows)
    adjacency = tmp_path / "adjacency.txt"
    adjacency.write_text(adjacency_text(small_graph))
    return counts, adjacency


class TestConfig:
    def test_defaults(self):
        config = load_config(None)
        assert config.model == "car"
        assert config.constraint.constraint() is None
        assert config.chain.iterations == 20000

    def test_yaml_and_overrides(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("model: logitnormal\nchain:\n  seed: 9\n  iterations: 1000\n  burn_in: 100\nconstraint:\n  a0_max: 5\n")
        config = load_config(path).merged({"chain.seed": 3, "chain.thin": None, "quantiles": (0.1, 0.9)})
        assert config.model == "logitnormal"
        assert (config.chain.seed, config.chain.iterations, config.chain.thin) == (3, 1000, 3)
        assert config.quantiles == (0.1, 0.9)
        assert config.constraint.constraint().a0_max == 5.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("chains: {}\n")
        result = IO().config(path, {})
        assert not result["ok"] and result["kind"] == "validation"

    @pytest.mark.parametrize("text", ["model: [unclosed\n", "- just\n- a list\n"])
    def test_bad_yaml(self, tmp_path, text):
        path = tmp_path / "run.yaml"
        path.write_text(text)
        with pytest.raises(InputError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


class TestResultsStore:
    def test_metadata_sorted_and_readable(self, tmp_path):
        store = ResultsStore(tmp_path / "out")
        path = store.write_metadata({"seed": 7, "a0_max": 5.0, "model": "car", "ratio": 0.1 + 0.2})
        assert path.read_text().splitlines() == ["a0_max=5", "model=car", "ratio=0.3", "seed=7"]
        assert read_metadata(path)["model"] == "car"

    def test_csv_format(self, tmp_path):
        store = ResultsStore(tmp_path)
        path = store.save_frame("t.csv", pd.DataFrame({"x": [1 / 3], "k": ["a"]}))
        assert path.read_bytes() == b"x,k\n0.333333333333,a\n"
        assert store.written == [path]

    def test_unwritable_root(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OutputError):
            ResultsStore(blocker / "out")

    def test_write_results(self, tmp_path):
        frame = pd.DataFrame({"region_id": ["A"], "mean": [0.1]})
        paths = write_results(
            tmp_path, summaries={"white": frame}, disparities={("black", "white"): frame}, metadata={"seed": 1}
        )
        assert [p.name for p in paths] == ["summary_white.csv", "disparity_black_vs_white.csv", "metadata.txt"]
        assert "software_version" in read_metadata(tmp_path / "metadata.txt")

    def test_config_hash_is_order_free(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestFacade:
    def test_bad_counts_is_validation(self, tmp_path):
        counts = tmp_path / "counts.csv"
        counts.write_text(HEADER + "A,all,5,6\n")
        result = IO().fit(counts, "all", RunConfig(model="beta_binomial"))
        assert result == {"ok": False, "data": None, "error": result["error"], "kind": "validation"}
        assert "line 2" in result["error"]

    def test_zero_trials_is_runtime(self, tmp_path):
        counts = tmp_path / "counts.csv"
        counts.write_text(HEADER + "A,all,0,0\nB,all,0,0\n")
        result = IO().fit(counts, "all", RunConfig(model="beta_binomial"))
        assert result["kind"] == "runtime"

    def test_car_without_adjacency(self, lattice_files):
        counts, _ = lattice_files
        result = IO().fit(counts, "all", RunConfig())
        assert result["kind"] == "validation"
        assert "adjacency" in result["error"]

    def test_informativeness_needs_one_pair(self):
        assert IO().informativeness(mu=-2.0)["kind"] == "validation"
        beta = IO().informativeness(a=6.0, b=594.0)["data"]
        assert beta["a_hat"] == pytest.approx(6.0, rel=1e-6)
        diffuse = IO().informativeness(mu=0.0, sigma2=100.0)["data"]
        assert diffuse["a_hat"] == pytest.approx(-0.48)
        assert diffuse["a"] is None and diffuse["b"] is None

    def test_disparity_same_stratum(self, lattice_files):
        counts, adjacency = lattice_files
        result = IO().disparity(counts, "all", "all", RunConfig(), adjacency=adjacency)
        assert result["kind"] == "validation"

    def test_summarize_all_strata(self, lattice_files, tmp_path):
        counts, adjacency = lattice_files
        config = RunConfig(model="beta_binomial").merged({"chain.iterations": 600, "chain.burn_in": 200})
        result = IO().summarize(counts, config, adjacency=adjacency, out_dir=tmp_path / "out")
        assert result["ok"], result["error"]
        data = result["data"]
        assert set(data["summaries"]) == {"all", "other"}
        assert data["metadata"]["stratum"] == "all,other"
        assert data["metadata"]["chain_seed_all"] != data["metadata"]["chain_seed_other"]
        assert (tmp_path / "out" / "summary_other.csv").exists()


class TestCommandLine:
    def test_informativeness(self, capsys):
        assert main(["informativeness", "--mu", "-4.59512", "--sigma2", "0.168067"]) == 0
        assert "a_hat = 6.000" in capsys.readouterr().out

    def test_diffuse_prior_reported_raw(self, capsys):
        assert main(["informativeness", "--mu", "0", "--sigma2", "100"]) == 0
        out = capsys.readouterr().out
        assert "a_hat = -0.480" in out
        assert "beta: no matching prior" in out

    def test_unknown_flag(self, capsys):
        assert main(["informativeness", "--bogus", "1"]) == 1

    def test_missing_counts_file(self, tmp_path, capsys):
        assert main(["describe", "--counts", str(tmp_path / "absent.csv")]) == 1
        assert "error" in capsys.readouterr().err

    def test_fit_error_exit_code(self, tmp_path, capsys):
        counts = tmp_path / "counts.csv"
        counts.write_text(HEADER + "A,all,0,0\nB,all,0,0\n")
        assert main(["fit-bb", "--counts", str(counts), "--stratum", "all", *QUICK]) == 2

    def test_describe(self, lattice_files, capsys):
        counts, _ = lattice_files
        assert main(["describe", "--counts", str(counts)]) == 0
        out = capsys.readouterr().out
        assert "all" in out and "other" in out

    def test_compare_priors_writes_table(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main(["compare-priors", "--a", "6", "--pi0", "0.01", "--events", "1", "--events", "20", "--out-dir", str(out_dir)])
        assert code == 0
        frame = pd.read_csv(out_dir / "compare_priors.csv")
        assert len(frame) == 2 * 3
        assert set(frame["y"]) == {1, 20}

    def test_fit_car_constrained_is_reproducible(self, lattice_files, tmp_path, capsys):
        counts, adjacency = lattice_files
        outputs = []
        for run in ("first", "second"):
            out_dir = tmp_path / run
            args = ["fit-car", "--counts", str(counts), "--adjacency", str(adjacency), "--stratum", "all",
                    "--constrain-a0", "5", "--out-dir", str(out_dir), *QUICK]
            assert main(args) == 0
            outputs.append(out_dir)
        meta = read_metadata(outputs[0] / "metadata.txt")
        assert meta["a0_max"] == "5"
        assert meta["model"] == "car"
        assert meta["m0"] == "3"
        for name in ("metadata.txt", "summary_all.csv", "samples_car_all.csv"):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
        summary = pd.read_csv(outputs[0] / "summary_all.csv")
        assert (summary["a0_q0.975"] < 5).all()

    def test_fit_ln_with_config_file(self, lattice_files, tmp_path, capsys):
        counts, _ = lattice_files
        config = tmp_path / "run.yaml"
        config.write_text("chain:\n  iterations: 600\n  burn_in: 200\n  thin: 1\n")
        assert main(["fit-ln", "--counts", str(counts), "--stratum", "all", "--config", str(config), "--a-max", "40"]) == 0
        assert "logitnormal / all: 400 draws" in capsys.readouterr().out

    def test_simulate_bad_grid(self, capsys):
        assert main(["simulate", "--pi0", "1.5", "--L", "1"]) == 1
