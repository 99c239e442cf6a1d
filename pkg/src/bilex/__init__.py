"""Bilingual lexicon induction combining static embeddings with contextual anchors."""

from .align import (MappingPair, SelfLearnResult, normalize, procrustes,
                    seed_dictionary_identical_strings, self_learn)
from .anchors import (AnchorMatrix, anchor_coverage_report, build_anchors,
                      load_anchor_matrix)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .contrastive import (TrainConfig, TrainResult, UnsupResult, contrastive_loss,
                          mine_negatives, train_supervised, train_unsupervised)
from .io import (BilingualDictionary, ContextRecord, EmbeddingMatrix, FormatError,
                 Vocabulary, load_dictionary, load_embeddings, save_dictionary,
                 save_embeddings, stream_context_records)
from .retrieve import (RetrievalSpaces, SimilarityConfig, cosine_matrix, csls_scores,
                       default_anchor_weight_grid, induce, interpolated_scores,
                       precision_at_1, tune_anchor_weight_supervised,
                       tune_anchor_weight_unsupervised)
from .spring import (SpringNet, SpringParams, UnifiedSpace, build_unified,
                     init_spring_params, spring_backward, spring_forward, unify)
from .synthgen import SynthWorld, SynthWorldConfig, generate, split_pairs

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
