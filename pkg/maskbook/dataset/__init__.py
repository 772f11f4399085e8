from .audio_io import WavFormatError, read_wav, write_wav
from .spec_io import SpectrogramFormatError, save_spectrogram, load_spectrogram
from .manifest import MixtureRecord, ManifestEntry, CorpusManifest, read_manifest, write_manifest, load_corpus, \
                    load_record, save_record
from .synth import SynthSpec, source_band, synth_source, synth_records, synth_corpus
