from prettytable import PrettyTable

from ..dataset import SynthSpec, synth_corpus
from ..utils import time_cost
from .base import Base


class Synth(Base):

    @time_cost('synth')
    def run(self):
        spec = SynthSpec(count=self.synth_count, duration=self.synth_duration, sample_rate=self.sample_rate,
                         n_sources=self.n_sources, source_types=self.source_types, snr_range=self.snr_range,
                         band_overlap=self.band_overlap, subtype=self.subtype)
        manifest, records = synth_corpus(spec, self.seed, self.output_path('corpus'), self.jobs)
        table = PrettyTable(['count', 'duration (s)', 'sources', 'sample rate', 'overlap'])
        table.add_row([len(records), spec.duration, spec.n_sources, spec.sample_rate, spec.band_overlap])
        self.log('synthetic corpus written to {}\n{}'.format(manifest.root, table))
        return manifest
