from .anomaly import KINDS, AnomalySpec, falloff, inject_anomaly, sample_anomaly_spec
from .categories import BUILTINS, builtin_category, check_parts_disjoint, resolve_category
from .dataset import Manifest, ManifestEntry, build_splits, fit_category_normalization, generate_dataset
from .generate import build_sdf_tuples, generate_abnormal, generate_normal, label_anomaly, tau_for
from .records import DenseCloud, LabeledPointCloud, SdfTupleSet

__all__ = [
    "KINDS",
    "AnomalySpec",
    "falloff",
    "inject_anomaly",
    "sample_anomaly_spec",
    "BUILTINS",
    "builtin_category",
    "check_parts_disjoint",
    "resolve_category",
    "Manifest",
    "ManifestEntry",
    "build_splits",
    "fit_category_normalization",
    "generate_dataset",
    "build_sdf_tuples",
    "generate_abnormal",
    "generate_normal",
    "label_anomaly",
    "tau_for",
    "DenseCloud",
    "LabeledPointCloud",
    "SdfTupleSet",
]
