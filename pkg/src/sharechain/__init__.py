"""Reconstruction of the sharing history of JPEG images across social platforms."""

from .bks import BKSCombiner, fit_bks, fuse
from .cascade import ChainCascade, infer, train_cascade
from .chains import ChainUniverse, SharingChain, enumerate_universe, format_chain_label, parse_chain_label
from .evaluation import StepReport, evaluate_cascade
from .features import FEATURE_NAMES, FeatureRecord, JpegFeatureExtractor, extract_all
from .forest import RandomForest

__version__ = "0.1.0"

__all__ = [
    "BKSCombiner", "ChainCascade", "ChainUniverse", "FEATURE_NAMES", "FeatureRecord", "JpegFeatureExtractor",
    "RandomForest", "SharingChain", "StepReport", "enumerate_universe", "evaluate_cascade", "extract_all",
    "fit_bks", "format_chain_label", "fuse", "infer", "parse_chain_label", "train_cascade",
]
