"""Synthetic sharing platforms, encoder and dataset builder."""

from .dataset import DatasetManifest, ManifestEntry, build_dataset, label_dirname, split_sources
from .encoder import JFIF_APP0, encode_jpeg
from .platforms import PlatformProfile, apply_platform, default_profiles, resize_bilinear, share_chain, target_size
from .sources import crop_top_left, initial_encode, rgb_to_ycbcr, synthetic_image, write_synthetic_sources

__all__ = [
    "DatasetManifest", "JFIF_APP0", "ManifestEntry", "PlatformProfile", "apply_platform", "build_dataset",
    "crop_top_left", "default_profiles", "encode_jpeg", "initial_encode", "label_dirname", "resize_bilinear",
    "rgb_to_ycbcr", "share_chain", "split_sources", "synthetic_image", "target_size", "write_synthetic_sources",
]
