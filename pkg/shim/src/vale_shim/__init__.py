"""vale-shim: HTTP service wrapping prediction, segmentation, and captioning
models behind the /predict, /segment, /caption wire contracts, with a fully
deterministic fixture-backed mock mode."""

from .config import ShimConfig, ShimConfigError
from .fixtures import FixtureStore, build_fixture_set, write_fixture_dir

__version__ = "0.1.0"
