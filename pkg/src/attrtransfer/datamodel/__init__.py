from .dataset import (
    AnnotatedDataset,
    SubjectSplit,
    align_rows,
    load_annotations,
    load_continuous,
    load_dataset,
    load_embeddings,
    save_annotations,
    save_continuous,
    save_dataset,
    save_embeddings,
    split_subject_exclusive,
)
from .schema import (
    FALSE,
    TRUE,
    UNDEFINED,
    AttributeSchema,
    AttributeSpec,
    check_tristate,
    load_schema,
    respects_schema,
    save_schema,
)
from .synthetic import SyntheticData, SyntheticSpec, generate_synthetic
