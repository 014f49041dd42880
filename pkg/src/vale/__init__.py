"""vale: visual and language explanations for image classifiers.

The library computes Shapley attributions of a classifier's prediction over
image regions, extracts the highest-attribution coordinates, segments the
object of interest from point prompts, builds a label-conditioned caption
prompt, talks to prediction/segmentation/captioning services (or bundled
deterministic mocks), and scores captions with BLEU.
"""

from .errors import (CapacityError, ConfigError, ConflictError, InputError,
                     ProtocolError, TransportError, ValeError)
from .image import Image, digest, from_png_bytes, load_png, save_png, to_png_bytes
from .gateway import (ClassPrediction, PredictorHandle, RemotePredictor,
                      ToyLinearPredictor, ToyPatchPredictor, build_predictor,
                      predict, top_label)
from .partition import (Coalition, CoalitionMasker, MaskingPolicy,
                        SuperpixelPartition, mask_coalition, partition_grid,
                        partition_slic)
from .shapley import (AttributionMap, EstimatorConfig, RoiPoints,
                      exact_game_values, extract_roi, game_from_predictor,
                      game_from_set_function, render_heatmap,
                      sampled_game_values, shapley_exact, shapley_sampled)
from .segment import (MaskCandidate, PointPrompt, SegmentedObject,
                      segment_builtin, segment_remote, select_best)
from .prompts import PromptBundle, PromptRegistry, PromptTemplate, render
from .captioning import CaptionClient, CaptionRequest, CaptionResponse
from .bleu import BleuReport, TokenizedText, bleu, evaluate_prompts, tokenize
from .pipeline import (ExplanationRecord, PipelineConfig, ablate, batch,
                       explain, validate_record)

__version__ = "0.1.0"
