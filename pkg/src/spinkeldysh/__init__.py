# spinkeldysh/__init__.py
try:
    from importlib.metadata import version, PackageNotFoundError
except ImportError:
    from importlib_metadata import version, PackageNotFoundError  # type: ignore

try:
    __version__ = version("spinkeldysh")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.0.0"
