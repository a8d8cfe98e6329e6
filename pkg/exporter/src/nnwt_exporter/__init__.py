"""Converter from pretrained zoo weights to the engine's NNWT archives."""

from .export import export
from .recipes import clip_rn50_recipe, recipe_for, vgg16_recipe
from .verify import verify
from .writer import read_archive, write_archive

__version__ = "0.1.0"
