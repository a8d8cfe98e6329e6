"""Differentiable texture stylization for 3D meshes.

Optimizes an additive style texture so randomized renders of a mesh match
reference images via nearest-neighbor feature matching on CNN features, with
content-preservation and color-palette losses.
"""

from .archive import WeightArchive, load_archive, save_archive
from .backbones import (
    BackboneSpec,
    FeatureSet,
    build_spec,
    concat_style_features,
    extract_features,
    normalize_input,
    toy_archive,
)
from .config import OptimConfig
from .errors import (
    ArchiveFormatError,
    ConfigurationError,
    IncompleteArchiveError,
    NumericalError,
    TexstyleError,
)
from .losses import (
    LossReport,
    LossWeights,
    color_palette_loss,
    content_loss,
    cosine_distance,
    gram_loss,
    nnfm_loss,
    total_loss,
)
from .mesh import Mesh, load_obj
from .palette import Palette, kmeans_extract, nearest_color
from .pipeline import SceneSample, StyleAsset, Stylizer, prepare_asset, sample_scene
from .renderer import Camera, GBuffer, Material, PointLight, composite_background, rasterize, shade
from .tensor import Tensor, backward

__version__ = "0.1.0"
