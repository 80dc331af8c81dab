"""Code-gadget datasets from C/C++ sources and small neural classifiers over them."""

__version__ = "0.1.0"
