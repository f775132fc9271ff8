"""Skeleton motion forecasting with a GAN: a GRU generator samples several
futures per observed prefix, a WGAN-GP critic trains it, and a separate
discriminator scores how real a sequence looks."""
from . import autodiff, losses, models, skeleton, trainer

__version__ = "0.1.0"

__all__ = ["autodiff", "losses", "models", "skeleton", "trainer", "__version__"]
