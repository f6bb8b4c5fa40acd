from .loaders import load_pair_dir, write_flat_dataset
from .pairs import Dataset, ImagePair, PairMeta, split_dataset
from .patches import example_seed, sample_patch
from .scenes import degrade, render_reference, synth_scene, synthesize_dataset

__all__ = [
    "Dataset",
    "ImagePair",
    "PairMeta",
    "degrade",
    "example_seed",
    "load_pair_dir",
    "render_reference",
    "sample_patch",
    "split_dataset",
    "synth_scene",
    "synthesize_dataset",
    "write_flat_dataset",
]
