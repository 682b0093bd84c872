"""Sparse non-negative dictionary analysis of noisy two-speaker recordings."""

from ._core import (
    SAMPLE_RATE,
    Corpus,
    DataError,
    Dictionary,
    DictionaryBank,
    Error,
    FeatureMatrix,
    NumericalError,
    UsageError,
    analyze,
    extract_features,
    identify_speaker,
    kl_divergence,
    learn_bank,
    learn_dictionary,
    load_bank,
    miss_false_rates,
    open_corpus,
    read_wav,
    reconstruct,
    run_manifest,
    save_bank,
    save_corpus,
    sdr,
    segment_noise,
    separate,
    solve_asna,
    solve_mu,
    update_dictionary,
    write_wav,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
