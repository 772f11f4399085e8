import os
import time

from prettytable import PrettyTable

from ..dataset import SynthSpec, load_corpus, read_manifest, synth_records
from ..stft import stft
from ..utils import get_logger, FlagCounter, init_seeds, save_yaml, write2log, check_file_and_remake

logger = get_logger(__name__)


class Base(object):
    """Common set-up of every subcommand: config attributes, output directory, log file and flag counts."""

    def __init__(self, config):
        hparams_dict = self.load_config_dict(config)
        self._init_log(hparams_dict)
        self.flags = FlagCounter()
        self.stft_config = config.stft_config()
        init_seeds(self.seed)

    def load_config_dict(self, config):
        hparams_dict = {}
        for key, value in config.to_dict().items():
            setattr(self, key, value)
            hparams_dict[key] = value
        logger.debug(hparams_dict)
        return hparams_dict

    def _init_log(self, hparams_dict):
        check_file_and_remake(self.out)
        self.log_file = os.path.join(self.out, '{}.log'.format(self.command))
        if os.path.exists(self.log_file):
            os.remove(self.log_file)
        write2log(self.log_file, '================ {} ({}) ================\n'.format(self.command, time.strftime('%c')))
        save_yaml(hparams_dict, os.path.join(self.out, 'config.yml'))

    def log(self, message):
        logger.info(message)
        write2log(self.log_file, message + '\n')

    def output_path(self, name):
        return os.path.join(self.out, name)

    def load_records(self, limit=None):
        """Mixtures of the manifest, or a synthetic corpus generated from the corpus options."""
        limit = limit or self.corpus_size
        if self.manifest:
            return load_corpus(read_manifest(self.manifest), jobs=self.jobs, limit=limit)
        spec = SynthSpec(count=min(self.synth_count, limit), duration=self.synth_duration, sample_rate=self.sample_rate,
                         n_sources=self.n_sources, source_types=self.source_types, snr_range=self.snr_range,
                         band_overlap=self.band_overlap)
        self.log('using {} synthetic mixtures (seed {})'.format(spec.count, self.seed))
        return synth_records(spec, self.seed, self.jobs)

    def spectra(self, record):
        """Mixture spectrogram (T, F) and stacked source spectrograms (I, T, F) of a record."""
        X = stft(record.mixture.samples, self.stft_config).bins
        S = stft(record.source_matrix(), self.stft_config).bins
        return X, S

    def run(self):
        raise NotImplementedError

    def exit_status(self):
        """0 when every degeneracy flag count is within max_flags, 1 otherwise."""
        if self.flags:
            table = PrettyTable(['flag', 'count'])
            for key, value in sorted(self.flags.items()):
                table.add_row([key, value])
            self.log('degeneracy flags\n{}'.format(table))
        if self.max_flags < 0:
            return 0
        exceeded = self.flags.exceeded(self.max_flags)
        if exceeded:
            logger.warning('flags above max_flags={}: {}'.format(self.max_flags, exceeded))
            return 1
        return 0
