import os

import numpy as np
import torch
from prettytable import PrettyTable

from ..dataset import load_spectrogram, read_wav, write_wav
from ..evaluation import evaluate_utterance
from ..misi import misi
from ..oracle_masks import oracle_mask
from ..stft import Spectrogram, Waveform, stft
from ..utils import write_csv, time_cost
from .base import Base

RESULT_COLUMNS = ['utt_id', 'source_idx', 'iters', 'sisdr_db', 'sisdri_db', 'perm']


def _real_values(path):
    loaded = load_spectrogram(path)
    if isinstance(loaded, Spectrogram):
        return loaded.bins.abs()
    return loaded.values


class MisiRun(Base):
    """Phase reconstruction of given magnitudes; on a corpus also scores K iterations against plain iSTFT."""

    def initial_phases(self, X, n_source):
        if self.init == 'noisy':
            return torch.angle(X).expand(n_source, *X.shape).clone()
        if self.init == 'zero':
            return torch.zeros(n_source, *X.shape, dtype=torch.float64)
        return torch.stack([_real_values(path) for path in self.phases])

    def write_estimates(self, utt_id, waveforms):
        for index, samples in enumerate(waveforms):
            write_wav(self.output_path(os.path.join('estimates', '{}_est{}.wav'.format(utt_id, index + 1))),
                      Waveform(samples, self.sample_rate))

    def run_files(self):
        mixture = read_wav(self.mixture)
        X = stft(mixture.samples, self.stft_config).bins
        magnitudes = torch.stack([_real_values(path) for path in self.magnitudes])
        phases = self.initial_phases(X, magnitudes.shape[0])
        waveforms = misi(magnitudes, phases, mixture.samples, self.iters, self.stft_config, self.redistribute_at_zero)
        utt_id = os.path.splitext(os.path.basename(self.mixture))[0]
        self.write_estimates(utt_id, waveforms)
        self.log('MISI: {} sources of {} reconstructed with K={}'.format(magnitudes.shape[0], self.mixture, self.iters))
        return waveforms

    def run_corpus(self):
        rows = []
        for record in self.load_records():
            X, S = self.spectra(record)
            magnitudes = torch.stack([oracle_mask('IAM', S[i], X=X, r_max=self.r_max).values * X.abs()
                                      for i in range(S.shape[0])])
            phases = self.initial_phases(X, S.shape[0])
            for iters in sorted({0, self.iters}):
                waveforms = misi(magnitudes, phases, record.mixture.samples, iters, self.stft_config,
                                 self.redistribute_at_zero)
                for row in evaluate_utterance(record.id, list(waveforms), record.source_matrix(), record.mixture.samples):
                    row['iters'] = iters
                    rows.append(row)
                if iters == self.iters:
                    self.write_estimates(record.id, waveforms)
        write_csv(self.output_path('misi_eval.csv'), rows, RESULT_COLUMNS)
        table = PrettyTable(['K', 'SI-SDRi mean', 'SI-SDRi median'])
        for iters in sorted({row['iters'] for row in rows}):
            values = np.array([row['sisdri_db'] for row in rows if row['iters'] == iters])
            table.add_row([iters, '{:.2f}'.format(float(np.mean(values))), '{:.2f}'.format(float(np.median(values)))])
        self.log('MISI with oracle IAM magnitudes, {} initial phase\n{}'.format(self.init, table))
        return rows

    @time_cost('misi')
    def run(self):
        if self.mixture:
            return self.run_files()
        return self.run_corpus()
