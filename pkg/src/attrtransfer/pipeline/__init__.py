from .calibration import (
    DISCARDED,
    RETAINED,
    AttributeCalibration,
    CalibrationConfig,
    CalibrationTable,
    balanced_accuracy,
    calibrate,
    calibrate_attribute,
    load_calibration,
    save_calibration,
    tail_accuracy,
)
from .report import ProvenanceRow, provenance_csv, provenance_report, provenance_rows, provenance_text, write_provenance
from .run import MacSettings, PipelineConfig, PipelineResult, SourceRun, run_pipeline, stage_seed
from .transfer import (
    SourceAnnotations,
    SourcePredictions,
    aggregate,
    merged_schema,
    obtain_plausibility,
    transfer,
)
