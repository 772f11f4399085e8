"""
Corpus manifests: one line per mixture, ``id<TAB>mixture.wav<TAB>source1.wav<TAB>source2.wav...``,
paths relative to the manifest directory, preceded by a ``# sample_rate=<Hz>`` line.
"""
import os
from dataclasses import dataclass, field
from typing import List

import torch
from joblib import Parallel, delayed

from .. import constants
from ..stft import Waveform
from ..utils import get_logger
from .audio_io import read_wav, write_wav

logger = get_logger(__name__)

MIXING_TOL = 1e-6


@dataclass
class MixtureRecord:
    mixture: Waveform
    sources: List[Waveform]
    id: str = ''
    tol: float = field(default=MIXING_TOL, repr=False)

    def __post_init__(self):
        if len(self.sources) < 1:
            raise ValueError('mixture {} has no sources'.format(self.id))
        lengths = {len(self.mixture)} | {len(source) for source in self.sources}
        if len(lengths) > 1:
            raise ValueError('mixture {}: sources and mixture differ in length {}'.format(self.id, sorted(lengths)))
        rates = {self.mixture.sample_rate} | {source.sample_rate for source in self.sources}
        if len(rates) > 1:
            raise ValueError('mixture {}: inconsistent sample rates {}'.format(self.id, sorted(rates)))
        error = float((self.mixture.samples - self.source_matrix().sum(0)).abs().max())
        if error > self.tol:
            raise ValueError('mixture {} differs from the sum of its sources by {:.3e}'.format(self.id, error))

    def source_matrix(self):
        return torch.stack([source.samples for source in self.sources])

    @property
    def sample_rate(self):
        return self.mixture.sample_rate


@dataclass
class ManifestEntry:
    id: str
    mixture: str
    sources: List[str]


@dataclass
class CorpusManifest:
    entries: List[ManifestEntry] = field(default_factory=list)
    sample_rate: int = constants.DEFAULT_SAMPLE_RATE
    root: str = '.'

    def __len__(self):
        return len(self.entries)

    def path(self, relative):
        return relative if os.path.isabs(relative) else os.path.join(self.root, relative)

    def check_files(self):
        missing = [self.path(p) for entry in self.entries for p in [entry.mixture] + entry.sources
                   if not os.path.exists(self.path(p))]
        if missing:
            raise FileNotFoundError('manifest references {} missing files, first: {}'.format(len(missing), missing[0]))


def read_manifest(path, check=True):
    if not os.path.exists(path):
        raise FileNotFoundError('manifest {} not found'.format(path))
    manifest = CorpusManifest(root=os.path.dirname(os.path.abspath(path)))
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip('\n')
            if not line.strip():
                continue
            if line.startswith('#'):
                key, _, value = line[1:].strip().partition('=')
                if key.strip() == 'sample_rate':
                    manifest.sample_rate = int(value)
                continue
            fields = line.split('\t')
            if len(fields) < 3:
                raise ValueError('{}:{}: expected id, mixture and at least one source'.format(path, line_no))
            manifest.entries.append(ManifestEntry(fields[0], fields[1], fields[2:]))
    if check:
        manifest.check_files()
    return manifest


def write_manifest(path, manifest):
    lines = ['# sample_rate={}'.format(manifest.sample_rate)]
    lines += ['\t'.join([entry.id, entry.mixture] + list(entry.sources)) for entry in manifest.entries]
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    return path


def load_record(manifest, entry):
    mixture = read_wav(manifest.path(entry.mixture))
    sources = [read_wav(manifest.path(source)) for source in entry.sources]
    for waveform in [mixture] + sources:
        if waveform.sample_rate != manifest.sample_rate:
            raise ValueError('{}: sample rate {} differs from manifest rate {}'.format(
                entry.id, waveform.sample_rate, manifest.sample_rate))
    # 16-bit files quantise every signal by up to half a step
    tol = max(MIXING_TOL, (len(sources) + 1) / 32768.)
    return MixtureRecord(mixture, sources, entry.id, tol)


def load_corpus(manifest, jobs=1, limit=None):
    """MixtureRecords of the manifest in manifest order."""
    if isinstance(manifest, str):
        manifest = read_manifest(manifest)
    entries = manifest.entries[:limit] if limit else manifest.entries
    records = Parallel(n_jobs=jobs)(delayed(load_record)(manifest, entry) for entry in entries)
    logger.info('loaded {} mixtures from corpus at {}'.format(len(records), manifest.root))
    return records


def save_record(directory, record, subtype='float32'):
    """Writes mixture and sources of a record to ``directory`` and returns its ManifestEntry."""
    mixture = '{}_mix.wav'.format(record.id)
    write_wav(os.path.join(directory, mixture), record.mixture, subtype)
    sources = []
    for index, source in enumerate(record.sources):
        name = '{}_s{}.wav'.format(record.id, index + 1)
        write_wav(os.path.join(directory, name), source, subtype)
        sources.append(name)
    return ManifestEntry(record.id, mixture, sources)
