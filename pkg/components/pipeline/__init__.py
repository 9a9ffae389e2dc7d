from components.pipeline.config import (
    DipoleSpec,
    RandomDipoleSpec,
    SensorGridSpec,
    NoiseSpec,
    ScenarioConfig,
    DataFiles,
    RunConfig,
    load_config,
    parse_config,
    with_overrides
)
from components.pipeline.scenario import (
    ScenarioFiles,
    standard_scenario,
    truth_measure,
    scenario_sensors,
    scenario_region,
    simulate_scenario,
    generate_scenario,
    file_sha256
)
from components.pipeline.runner import (
    RunSummary,
    load_inputs,
    run_inversion,
    lambda_sweep,
    certify_measure,
    SUMMARY_FILE,
    SWEEP_FILE,
    SWEEP_COLUMNS
)
