from .comparators import (
    HammingComparator,
    LogRegComparator,
    attribute_importance,
    fit_logistic,
    load_logreg,
    logreg_score,
    save_logreg,
    train_logreg,
)
from .features import DIFFER, FALSE_FALSE, SLOT_NAMES, TRUE_TRUE, hamming_score, joint_features, overlap_count
from .fusion import COMPLEMENT, INVERSE, fuse_scores, fusion_weights, minmax
from .metrics import (
    ClosedSetResult,
    OpenSetResult,
    ScoreSet,
    VerificationResult,
    equal_error_rate,
    error_rates,
    eval_closed_set,
    eval_open_set,
    eval_verification,
    open_set_rates,
    verification_scores,
    score_matrix,
    select_gallery,
    split_open_set,
)
from .pairs import (
    MIN_OVERLAP,
    ComparisonPair,
    PairSamplingConfig,
    PairSet,
    all_pairs,
    make_pairs,
    sample_training_pairs,
    valid_filter,
)
