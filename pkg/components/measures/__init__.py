from components.measures.geometry import Box, VoxelPartition, as_points
from components.measures.measure import DiscreteVectorMeasure, tv_norm, support_points
from components.measures.gsm import DipoleGsmSpace, project_onto_gsm
from components.measures.metrics import (
    TestFunctionFamily,
    r_distance_proxy,
    truncation_bound,
    hausdorff_distance,
    directed_distance
)
from components.measures.io import read_measure_csv, write_measure_csv, MEASURE_COLUMNS
