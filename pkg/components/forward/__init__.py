from components.forward.kernel import kernel_Kv, dipole_kernel, field_component, field_at
from components.forward.sensors import SensorGrid, planar_sensor_grid
from components.forward.model import ForwardModel, assemble, model_key
from components.forward.cache import save_model, load_model, cached_assemble
from components.forward.io import (
    read_sensor_csv,
    write_sensor_csv,
    read_field_csv,
    write_field_csv,
    SENSOR_COLUMNS,
    FIELD_COLUMNS
)
