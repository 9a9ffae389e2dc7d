import json

import numpy as np
import pytest
from pydantic import ValidationError

import app
from components.errors import ConfigurationError, SchemaError
from components.pipeline import (
    SUMMARY_FILE,
    SWEEP_COLUMNS,
    SWEEP_FILE,
    DataFiles,
    DipoleSpec,
    NoiseSpec,
    RandomDipoleSpec,
    RunConfig,
    ScenarioConfig,
    SensorGridSpec,
    certify_measure,
    generate_scenario,
    lambda_sweep,
    load_config,
    parse_config,
    run_inversion,
    simulate_scenario,
    standard_scenario,
    with_overrides,
)
from components.refinement import RefinementPlan
from components.solver import SolveOptions
from components.tables import read_table


def small_scenario(**update):
    scenario = ScenarioConfig(
        region_lo=(0.0, 0.0, -0.5),
        region_hi=(1.0, 1.0, 0.0),
        dipoles=[
            DipoleSpec(location=(0.3, 0.6, -0.2), moment=(0.0, 0.0, 1.0)),
            DipoleSpec(location=(0.7, 0.3, -0.35), moment=(0.5, 0.0, -0.5)),
        ],
        sensors=SensorGridSpec(extent=(-0.5, 1.5, -0.5, 1.5), shape=(8, 8), height=1.0),
        seed=3,
        scale=1.0,
    )
    return scenario.model_copy(update=update)


@pytest.fixture
def config(tmp_path):
    return RunConfig(
        scenario=small_scenario(),
        lambda_ratios=[0.2],
        refinement=RefinementPlan(base_resolution=(2, 2, 1), levels=2),
        solve=SolveOptions(certificate_tol=1e-9, objective_tol=1e-16, max_iters=100000),
        output_dir=str(tmp_path / "out"),
    )


def write_config(path, cfg: RunConfig):
    path.write_text(json.dumps(cfg.model_dump(mode="json"), indent=2), encoding="utf-8")
    return path


class TestConfig:

    def test_noise_needs_a_seed(self):
        raw = small_scenario().model_dump()
        raw.update(noise={"std": 0.1}, seed=None)
        with pytest.raises(ValidationError):
            ScenarioConfig.model_validate(raw)

    def test_random_dipoles_need_a_seed(self):
        raw = small_scenario().model_dump()
        raw.update(random_dipoles={"count": 2}, seed=None)
        with pytest.raises(ValidationError):
            ScenarioConfig.model_validate(raw)

    def test_exactly_one_input(self, config):
        raw = config.model_dump(mode="json")
        raw.pop("scenario")
        with pytest.raises(ConfigurationError):
            parse_config(raw)
        raw = config.model_dump(mode="json")
        raw["data"] = {"sensors": "s.csv", "field": "f.csv", "region_lo": [0, 0, -1], "region_hi": [1, 1, 0]}
        with pytest.raises(ConfigurationError):
            parse_config(raw)

    def test_unknown_version_is_rejected(self, config):
        raw = config.model_dump(mode="json")
        raw["config_version"] = 2
        with pytest.raises(ConfigurationError):
            parse_config(raw)

    def test_unknown_keys_are_rejected(self, config):
        raw = config.model_dump(mode="json")
        raw["solve"]["tolerance"] = 1e-3
        with pytest.raises(ConfigurationError):
            parse_config(raw)

    def test_json_errors_name_the_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "config_version": 1,\n  oops\n}\n', encoding="utf-8")
        with pytest.raises(SchemaError) as error:
            load_config(path)
        assert error.value.line == 3

    def test_validation_errors_name_the_field_and_line(self, config, tmp_path):
        raw = config.model_dump(mode="json")
        raw["solve"]["tolerance"] = 1e-3
        path = tmp_path / "run.json"
        text = json.dumps(raw, indent=2)
        path.write_text(text, encoding="utf-8")
        line = next(number for number, row in enumerate(text.splitlines(), start=1) if '"tolerance"' in row)
        with pytest.raises(ConfigurationError) as error:
            load_config(path)
        assert "solve.tolerance" in str(error.value)
        assert f"{path}:{line}:" in str(error.value)

    def test_sensor_spacing_sets_the_shape(self):
        spec = SensorGridSpec(extent=(-0.5, 1.5, 0.0, 1.0), spacing=0.25, height=1.0)
        assert spec.resolved_shape == (9, 5)
        _, data = simulate_scenario(small_scenario(sensors=spec))
        assert len(data.sensors) == 45
        assert np.allclose(np.diff(np.unique(data.sensors.points[:, 0])), 0.25)

    def test_sensor_grid_needs_exactly_one_size(self):
        with pytest.raises(ValidationError):
            SensorGridSpec(extent=(0.0, 1.0, 0.0, 1.0), height=1.0)
        with pytest.raises(ValidationError):
            SensorGridSpec(extent=(0.0, 1.0, 0.0, 1.0), shape=(3, 3), spacing=0.5, height=1.0)

    def test_file_round_trip(self, config, tmp_path):
        assert load_config(write_config(tmp_path / "run.json", config)) == config

    def test_overrides(self, config):
        cfg = with_overrides(config, seed=11, output="elsewhere", lambda_ratio=0.3, levels=3)
        assert cfg.scenario.seed == 11
        assert cfg.output_dir == "elsewhere"
        assert cfg.lambda_values == [(None, 0.3)]
        assert cfg.refinement.levels == 3
        assert with_overrides(config, lam=0.5).lambda_values == [(0.5, None)]

    def test_absolute_lambdas_take_precedence(self, config):
        cfg = config.model_copy(update={"lam": [0.1, 0.2]})
        assert cfg.lambda_values == [(0.1, None), (0.2, None)]


class TestScenario:

    def test_zero_dipoles_give_zero_field(self):
        _, data = simulate_scenario(small_scenario(dipoles=[]))
        assert np.array_equal(data.f, np.zeros(64))

    def test_nadir_value(self):
        scenario = ScenarioConfig(
            region_lo=(-1.0, -1.0, -1.0),
            region_hi=(1.0, 1.0, 0.0),
            dipoles=[DipoleSpec(location=(0.0, 0.0, -1.0), moment=(0.0, 0.0, 1.0))],
            sensors=SensorGridSpec(extent=(0.0, 0.0, 0.0, 0.0), shape=(1, 1), height=1.0),
            scale=1.0,
        )
        _, data = simulate_scenario(scenario)
        assert data.f[0] == pytest.approx(0.25)

    def test_standard_scenario(self):
        truth, data = simulate_scenario(standard_scenario())
        assert len(truth) == 3
        assert len(data.sensors) == 256
        assert np.all(data.sensors.points[:, 2] == pytest.approx(0.4))

    def test_generation_is_reproducible(self, tmp_path):
        scenario = small_scenario(random_dipoles=RandomDipoleSpec(count=4), noise=NoiseSpec(std=0.01))
        first = generate_scenario(scenario, tmp_path / "a")
        second = generate_scenario(scenario, tmp_path / "b")
        for name in ("truth", "sensors", "field", "manifest"):
            assert getattr(first, name).read_bytes() == getattr(second, name).read_bytes()
        manifest = json.loads(first.manifest.read_text(encoding="utf-8"))
        assert set(manifest["files"]) == {"truth.csv", "sensors.csv", "field.csv"}

    def test_seed_changes_the_noise(self):
        noisy = small_scenario(noise=NoiseSpec(std=0.01))
        _, a = simulate_scenario(noisy)
        _, b = simulate_scenario(noisy.model_copy(update={"seed": 4}))
        assert not np.array_equal(a.f, b.f)


class TestRunInversion:

    def test_output_layout(self, config):
        result = run_inversion(config)
        run_dir = result.output_dir / "lambda_00"
        for level in ("level_01", "level_02"):
            for name in ("solution.csv", "certificate.json", "dual_field.csv"):
                assert (run_dir / level / name).exists()
        assert (run_dir / "trace.csv").exists()
        assert (run_dir / "trace.json").exists()
        summary = json.loads((result.output_dir / SUMMARY_FILE).read_text(encoding="utf-8"))
        assert summary["config_version"] == 1
        assert summary["levels"] == 2
        assert summary["runs"][0]["objective_monotone"]
        assert summary["runs"][0]["audits_passed"]

    def test_summary_is_reproducible(self, config, tmp_path):
        first = run_inversion(config.model_copy(update={"output_dir": str(tmp_path / "a")}))
        second = run_inversion(config.model_copy(update={"output_dir": str(tmp_path / "b")}))
        assert (first.output_dir / SUMMARY_FILE).read_bytes() == (second.output_dir / SUMMARY_FILE).read_bytes()

    def test_single_level_uses_the_finest_grid(self, config):
        result = run_inversion(config, single_level=True)
        assert result.summary["levels"] == 1
        assert (result.output_dir / "lambda_00" / "level_01" / "solution.csv").exists()
        assert not (result.output_dir / "lambda_00" / "level_02").exists()

    def test_parallel_lambdas(self, config):
        cfg = config.model_copy(update={"lambda_ratios": [0.2, 0.4], "max_workers": 2})
        result = run_inversion(cfg)
        assert [run["lambda_ratio"] for run in result.summary["runs"]] == [0.2, 0.4]
        assert (result.output_dir / "lambda_01" / "trace.csv").exists()

    def test_measured_data_files(self, config, tmp_path):
        files = generate_scenario(config.scenario, tmp_path / "scenario")
        data = DataFiles(
            sensors=str(files.sensors),
            field=str(files.field),
            region_lo=config.scenario.region_lo,
            region_hi=config.scenario.region_hi,
            scale=1.0,
        )
        from_files = run_inversion(config.model_copy(update={"scenario": None, "data": data}))
        simulated = run_inversion(config.model_copy(update={"output_dir": str(tmp_path / "simulated")}))
        assert set(from_files.summary["inputs"]) == {"sensors.csv", "field.csv"}
        for a, b in zip(from_files.summary["runs"][0]["levels"], simulated.summary["runs"][0]["levels"]):
            assert a["objective"] == pytest.approx(b["objective"], rel=1e-12)

    def test_certify_a_written_solution(self, config):
        result = run_inversion(config)
        solution = result.output_dir / "lambda_00" / "level_02" / "solution.csv"
        report = certify_measure(config, solution, tol=1e-6)
        assert report.passed
        assert (result.output_dir / "certificate.json").exists()


class TestLambdaSweep:

    def test_above_lambda_max_gives_zero(self, config):
        result = lambda_sweep(config.model_copy(update={"lambda_ratios": [2.0, 4.0]}))
        table = read_table(result.output_dir / SWEEP_FILE, SWEEP_COLUMNS)
        assert table.shape == (2, len(SWEEP_COLUMNS))
        assert table[0, 0] > table[1, 0]
        assert np.all(table[:, 2] == 0.0)
        assert np.all(table[:, 4] == 0.0)
        assert table[0, 1] == table[1, 1] > 0.0
        assert np.allclose(table[:, 3], table[:, 1], rtol=1e-12)
        assert not result.warnings

    def test_single_lambda_gives_one_row(self, config):
        result = lambda_sweep(config)
        assert len(result.summary["sweep"]) == 1

    def test_path_is_monotone(self, config):
        result = lambda_sweep(config.model_copy(update={"lambda_ratios": [0.05, 0.1, 0.3, 0.6]}))
        rows = result.summary["sweep"]
        assert [row["lambda"] for row in rows] == sorted((row["lambda"] for row in rows), reverse=True)
        for previous, row in zip(rows, rows[1:]):
            assert row["tv"] >= previous["tv"] - 1e-6 * (1.0 + previous["tv"])


class TestCommandLine:

    def test_generate(self, config, tmp_path):
        path = write_config(tmp_path / "run.json", config)
        target = tmp_path / "generated"
        assert app.main(["generate", "--config", str(path), "--output", str(target)]) == 0
        assert (target / "field.csv").exists()
        assert (target / "manifest.json").exists()

    def test_invalid_config_exits_with_one(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json", encoding="utf-8")
        assert app.main(["refine", "--config", str(path)]) == 1

    def test_missing_config_exits_with_one(self, tmp_path):
        assert app.main(["invert", "--config", str(tmp_path / "missing.json")]) == 1

    def test_refine_writes_the_summary(self, config, tmp_path):
        path = write_config(tmp_path / "run.json", config)
        target = tmp_path / "refined"
        assert app.main(["refine", "--config", str(path), "--output", str(target), "--lambda-ratio", "0.3"]) == 0
        summary = json.loads((target / SUMMARY_FILE).read_text(encoding="utf-8"))
        assert summary["runs"][0]["lambda_ratio"] == 0.3

    def test_unknown_command_is_rejected(self):
        with pytest.raises(SystemExit):
            app.main(["frobnicate"])
