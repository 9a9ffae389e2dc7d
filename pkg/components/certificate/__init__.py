from components.certificate.report import CertificateReport, certify_moments
from components.certificate.check import (
    EquivalenceReport,
    certificate_check,
    equivalence_check,
    DEFAULT_ANGLE_TOL
)
from components.certificate.level_sets import (
    LevelSetSample,
    dual_field_sample,
    level_set_extract,
    atom_elimination_check,
    DEFAULT_BAND
)
