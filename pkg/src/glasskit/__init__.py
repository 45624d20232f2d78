"""Glass-region segmentation toolkit.

Submodules are imported lazily where it matters (the CLI caps BLAS threads
before numpy loads); plain `import glasskit.labelkit` etc. works as usual.
"""

__version__ = "0.1.0"
