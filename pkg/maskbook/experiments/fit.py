import os

import numpy as np
import torch
from prettytable import PrettyTable

from ..codebook import load_codebook, uniform_magbook
from ..codebook_opt import uniform_phasebook, uniform_combook
from ..dataset import CorpusManifest, ManifestEntry, write_manifest, write_wav
from ..grad import CodebookSet, LossSpec, OptimizerConfig, fit_logits, interpolate_masks, oracle_bound, resynthesize, \
                    make_problem
from ..stft import Waveform
from ..utils import write_csv, time_cost
from .base import Base


class Fit(Base):

    def codebooks(self):
        magbook = uniform_magbook(self.magbook_size or 3, self.r_max)
        phasebook, combook = None, None
        if self.head == 'magphase':
            phasebook = uniform_phasebook(self.phasebook_size)
        if self.head == 'combook':
            combook = uniform_combook(self.combook_size)
        if self.codebook_path:
            loaded = load_codebook(self.codebook_path)
            phasebook = loaded if loaded.kind == 'phasebook' else phasebook
            combook = loaded if loaded.kind == 'combook' else combook
            magbook = loaded if loaded.kind == 'magbook' else magbook
        return CodebookSet(self.head, magbook, phasebook, combook, self.trainable_atoms, self.relu)

    @time_cost('fit')
    def run(self):
        records = self.load_records(limit=self.utterances)
        codebooks = self.codebooks()
        loss_spec = LossSpec.parse(self.loss, self.norm, self.r_max)
        optimizer_cfg = OptimizerConfig(step_size=self.step_size, iterations=self.fit_iters, seed=self.seed,
                                        init_scale=self.init_scale, init=self.fit_init)
        estimate_dir = self.output_path('estimates')
        manifest = CorpusManifest(sample_rate=self.sample_rate, root=estimate_dir)
        summary = []
        for record in records:
            X, _ = self.spectra(record)
            flags = {}
            field, trace = fit_logits(None, codebooks, X, record.source_matrix(), loss_spec, optimizer_cfg,
                                      x_time=record.mixture.samples, config=self.stft_config, flags=flags)
            self.flags.merge(flags)
            write_csv(self.output_path('fit_trace_{}.csv'.format(record.id)), trace, ['iter', 'loss', 'sisdr', 'step'])
            bound, _, _ = oracle_bound(codebooks, X, record.source_matrix(), self.stft_config)

            problem = make_problem(X, record.source_matrix(), x_time=record.mixture.samples, config=self.stft_config)
            atoms = dict(codebooks.atoms())
            atoms.update(field.atoms)
            with torch.no_grad():
                masks, _ = interpolate_masks(field.logits, atoms, codebooks)
                waveforms = resynthesize(masks, problem, loss_spec.misi_iters)
            sources = []
            for index, samples in enumerate(waveforms):
                name = '{}_est{}.wav'.format(record.id, index + 1)
                write_wav(os.path.join(estimate_dir, name), Waveform(samples, self.sample_rate))
                sources.append(name)
            mixture_name = '{}_mix.wav'.format(record.id)
            write_wav(os.path.join(estimate_dir, mixture_name), record.mixture)
            manifest.entries.append(ManifestEntry(record.id, mixture_name, sources))

            final = trace[-1] if trace else {'loss': float('nan'), 'sisdr': float('nan')}
            summary.append({'utt_id': record.id, 'iterations': len(trace), 'loss': final['loss'],
                            'sisdr_db': final['sisdr'], 'bound_sisdr_db': float(np.mean(bound))})
            self.log('{}: loss {:.6e}, SI-SDR {:.2f} dB (representation bound {:.2f} dB)'.format(
                record.id, final['loss'], final['sisdr'], float(np.mean(bound))))
        write_manifest(os.path.join(estimate_dir, 'manifest.txt'), manifest)
        write_csv(self.output_path('fit_summary.csv'), summary, ['utt_id', 'iterations', 'loss', 'sisdr_db', 'bound_sisdr_db'])

        table = PrettyTable(['utterance', 'loss', 'SI-SDR', 'bound'])
        for row in summary:
            table.add_row([row['utt_id'], '{:.4e}'.format(row['loss']), '{:.2f}'.format(row['sisdr_db']),
                           '{:.2f}'.format(row['bound_sisdr_db'])])
        self.log('fit results ({} on a {} head)\n{}'.format(self.loss, self.head, table))
        return summary
