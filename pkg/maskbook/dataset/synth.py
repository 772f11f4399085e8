"""
Desk-scale synthetic mixtures.

Each source lives in its own frequency band; ``band_overlap`` widens the bands
into each other (0 gives disjoint bands with a guard gap, 1 lets every band
cover its neighbours). Sources are scaled to the drawn SNR against the first
source and quantised to the WAV sample grid; the mixture is their exact sum.
"""
import os
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import signal

from .. import constants
from ..stft import Waveform
from ..utils import get_logger
from .audio_io import PCM16_SCALE, WAV_SUBTYPES
from .manifest import MixtureRecord, CorpusManifest, write_manifest, save_record

logger = get_logger(__name__)

MIN_FREQUENCY = 80.
MAX_FREQUENCY_RATIO = 0.45
GUARD_RATIO = 0.1
# WAV sample grids; grid values below 2 in magnitude are stored exactly
SAMPLE_QUANTUM = {'float32': 2. ** -23, 'PCM_16': 1. / PCM16_SCALE}


@dataclass
class SynthSpec:
    count: int = 20
    duration: float = 1.
    sample_rate: int = constants.DEFAULT_SAMPLE_RATE
    n_sources: int = 2
    source_types: Tuple[str, ...] = constants.SOURCE_TYPES
    snr_range: Tuple[float, float] = (-5., 5.)
    band_overlap: float = 0.5
    fade: float = 0.01
    peak: float = 0.9
    id_prefix: str = 'mix'
    subtype: str = 'float32'

    def __post_init__(self):
        self.source_types = tuple(self.source_types)
        self.snr_range = tuple(float(v) for v in self.snr_range)
        if self.count < 1 or self.n_sources < 1:
            raise ValueError('count and n_sources must be >= 1')
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError('duration and sample_rate must be positive')
        unknown = [kind for kind in self.source_types if kind not in constants.SOURCE_TYPES]
        if not self.source_types or unknown:
            raise ValueError('unknown source types {}, expected a subset of {}'.format(unknown, constants.SOURCE_TYPES))
        if len(self.snr_range) != 2 or self.snr_range[0] > self.snr_range[1]:
            raise ValueError('snr_range must be (low, high) with low <= high')
        if not 0. <= self.band_overlap <= 1.:
            raise ValueError('band_overlap must lie in [0, 1]')
        if MIN_FREQUENCY >= MAX_FREQUENCY_RATIO * self.sample_rate:
            raise ValueError('sample rate {} leaves no usable band below Nyquist'.format(self.sample_rate))
        if 2 * self.fade >= self.duration:
            raise ValueError('fades longer than the signal')
        if self.subtype not in WAV_SUBTYPES:
            raise ValueError('unknown WAV subtype {!r}, expected one of {}'.format(self.subtype, WAV_SUBTYPES))

    @property
    def length(self):
        return int(round(self.duration * self.sample_rate))


def source_band(index, spec):
    """(low, high) Hz band of source ``index``; always strictly below Nyquist."""
    f_min, f_max = MIN_FREQUENCY, MAX_FREQUENCY_RATIO * spec.sample_rate
    width = (f_max - f_min) / spec.n_sources
    low = f_min + index * width - spec.band_overlap * width + GUARD_RATIO * width
    high = f_min + (index + 1) * width + spec.band_overlap * width - GUARD_RATIO * width
    return max(low, f_min), min(high, f_max)


def _fade(length, n_fade):
    envelope = np.ones(length)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        envelope[:n_fade] = ramp
        envelope[-n_fade:] = ramp[::-1]
    return envelope


def _sinusoid_bank(rng, t, band, n_partial=None):
    n_partial = n_partial or int(rng.integers(3, 7))
    frequencies = rng.uniform(band[0], band[1], n_partial)
    amplitudes = rng.uniform(0.3, 1., n_partial)
    phases = rng.uniform(-np.pi, np.pi, n_partial)
    return (amplitudes[:, None] * np.sin(2 * np.pi * frequencies[:, None] * t + phases[:, None])).sum(0)


def synth_source(kind, rng, spec, band):
    """One unit-RMS source of the given type confined (up to filter skirts) to ``band``."""
    t = np.arange(spec.length) / spec.sample_rate
    if kind == 'sinusoid-bank':
        samples = _sinusoid_bank(rng, t, band)
    elif kind == 'chirp':
        f0, f1 = rng.uniform(band[0], band[1], 2)
        samples = signal.chirp(t, f0=f0, t1=t[-1] if len(t) > 1 else 1., f1=f1, method='linear',
                               phi=rng.uniform(-180., 180.))
    elif kind == 'filtered-noise':
        sos = signal.butter(6, band, btype='bandpass', fs=spec.sample_rate, output='sos')
        white = rng.standard_normal(spec.length + 2 * spec.sample_rate // 10)
        samples = signal.sosfiltfilt(sos, white)[spec.sample_rate // 10:][:spec.length]
    elif kind == 'speech-like-am':
        # syllable-rate amplitude modulation of a harmonic-ish carrier
        rate = rng.uniform(3., 8.)
        envelope = 1. + 0.8 * np.sin(2 * np.pi * rate * t + rng.uniform(-np.pi, np.pi))
        samples = envelope * _sinusoid_bank(rng, t, band)
    else:
        raise ValueError('unknown source type {!r}'.format(kind))
    samples = samples * _fade(spec.length, int(round(spec.fade * spec.sample_rate)))
    rms = np.sqrt(np.mean(samples ** 2))
    if rms == 0:
        raise ValueError('synthesised a silent {} source'.format(kind))
    return samples / rms


def synth_record(spec, index, seed_sequence):
    rng = np.random.default_rng(seed_sequence)
    sources = []
    for source_index in range(spec.n_sources):
        kind = spec.source_types[int(rng.integers(len(spec.source_types)))]
        samples = synth_source(kind, rng, spec, source_band(source_index, spec))
        if source_index > 0:
            snr = rng.uniform(*spec.snr_range)
            samples = samples * 10 ** (-snr / 20)
        sources.append(samples)
    gain = spec.peak / max(np.abs(np.sum(sources, 0)).max(), 1e-12)
    quantum = SAMPLE_QUANTUM[spec.subtype]
    sources = [np.round(gain * s / quantum) * quantum for s in sources]
    mixture = np.sum(sources, 0)
    return MixtureRecord(Waveform(mixture, spec.sample_rate),
                         [Waveform(s, spec.sample_rate) for s in sources],
                         '{}{:04d}'.format(spec.id_prefix, index))


def synth_records(spec, seed=0, jobs=1):
    """Deterministic list of MixtureRecords; every entry draws from its own spawned seed."""
    children = np.random.SeedSequence(int(seed)).spawn(spec.count)
    return Parallel(n_jobs=jobs)(delayed(synth_record)(spec, index, child) for index, child in enumerate(children))


def synth_corpus(spec, seed=0, out_dir=None, jobs=1, subtype=None):
    """
    Generates the corpus and, when ``out_dir`` is given, writes WAV files plus ``manifest.txt``.
    Samples are quantised for ``subtype`` (default ``spec.subtype``), so every written
    mixture file equals the sum of its source files exactly. Returns (CorpusManifest, records).
    """
    if subtype is not None and subtype != spec.subtype:
        spec = replace(spec, subtype=subtype)
    records = synth_records(spec, seed, jobs)
    manifest = CorpusManifest(sample_rate=spec.sample_rate, root=out_dir or '.')
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        manifest.entries = [save_record(out_dir, record, spec.subtype) for record in records]
        write_manifest(os.path.join(out_dir, 'manifest.txt'), manifest)
        logger.info('wrote {} synthetic mixtures to {}'.format(len(records), out_dir))
    return manifest, records
