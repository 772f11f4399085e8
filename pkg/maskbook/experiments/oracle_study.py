"""
Oracle mask study: SI-SDR improvement of every (mask kind x r_max x phase source x
phasebook) cell on a corpus, plus the energy-weighted statistics of the oracle
targets.
"""
from collections import Counter, namedtuple

import numpy as np
import pandas
import torch
from joblib import Parallel, delayed
from prettytable import PrettyTable
from tqdm import tqdm

from .. import constants
from ..codebook import Phasebook
from ..codebook_opt import optimize_phasebook, phasebook_assign, uniform_phasebook
from ..evaluation import evaluate_utterance
from ..oracle_masks import MaskKind, oracle_mask, phase_difference, mask_histogram
from ..stft import stft, istft
from ..utils import write_csv, time_cost
from .base import Base

Cell = namedtuple('Cell', ['mask', 'r_max', 'phase_source', 'phasebook_size', 'phasebook'])
CELL_COLUMNS = list(Cell._fields)


def build_cells(mask_kinds, r_max_list, phase_sources, phasebook_sizes, optimized_sizes=()):
    cells = []
    for kind in mask_kinds:
        for r_max in (r_max_list if MaskKind(kind).uses_r_max else ['']):
            if MaskKind(kind).is_complex:
                cells.append(Cell(kind, r_max, 'complex', 0, ''))
                continue
            for phase_source in phase_sources:
                if phase_source != 'phasebook':
                    cells.append(Cell(kind, r_max, phase_source, 0, ''))
                    continue
                for size in phasebook_sizes:
                    cells.append(Cell(kind, r_max, 'phasebook', size, 'uniform'))
                    if size in optimized_sizes:
                        cells.append(Cell(kind, r_max, 'phasebook', size, 'optimized'))
    return cells


def fixed_phasebook(size):
    """Uniform phasebook; a single atom is the zero phase correction, i.e. the noisy mixture phase."""
    return Phasebook(torch.zeros(1, dtype=torch.float64)) if size == 1 else uniform_phasebook(size)


def masked_estimate(cell, S, X, phasebooks):
    """Estimated source spectrogram of one cell; returns (Y, guarded bins)."""
    r_max = constants.DEFAULT_R_MAX if cell.r_max == '' else cell.r_max
    mask = oracle_mask(cell.mask, S, X=X, r_max=r_max)
    if cell.phase_source in ('complex', 'noisy'):
        return mask.values * X, mask.guarded
    if cell.phase_source == 'true':
        return mask.values * X.abs() * torch.exp(1j * torch.angle(S)), mask.guarded
    phasebook = phasebooks[(cell.phasebook, cell.phasebook_size)]
    theta = phasebook.atoms[phasebook_assign(phasebook, S, X)]
    return mask.values * X * torch.exp(1j * theta.to(torch.complex128)), mask.guarded


def study_record(record, cells, stft_config, phasebooks):
    X = stft(record.mixture.samples, stft_config).bins
    S = stft(record.source_matrix(), stft_config).bins
    references = record.source_matrix()
    length = references.shape[-1]
    rows, flags = [], Counter()
    for cell in cells:
        estimates = []
        for index in range(S.shape[0]):
            Y, guarded = masked_estimate(cell, S[index], X, phasebooks)
            flags['zero_mixture'] += guarded
            estimates.append(istft(Y, stft_config, target_length=length))
        for row in evaluate_utterance(record.id, estimates, references, record.mixture.samples):
            row.update(cell._asdict())
            rows.append(row)
    return rows, flags


class OracleStudy(Base):

    def optimized_phasebooks(self, records):
        corpus = []
        for record in records:
            X, S = self.spectra(record)
            corpus += [(S[index], X) for index in range(S.shape[0])]
        phasebooks, rows = {}, []
        for size in self.phasebook_sizes:
            if size < 2:
                continue
            phasebook, report = optimize_phasebook(uniform_phasebook(size), corpus, self.m_source, self.epochs,
                                                   r_max=self.r_max)
            phasebooks[('optimized', size)] = phasebook
            rows.append({'phasebook_size': size, 'uniform_objective': report.objectives[0],
                         'optimized_objective': report.objectives[-1], 'epochs_run': report.epochs_run,
                         'converged': report.converged,
                         'atoms': ' '.join('{:.6f}'.format(a) for a in phasebook.atoms.tolist())})
            self.log('phasebook P={}: EM objective {:.6e} -> {:.6e}'.format(
                size, report.objectives[0], report.objectives[-1]))
        write_csv(self.output_path('phasebook_objective.csv'), rows,
                  ['phasebook_size', 'uniform_objective', 'optimized_objective', 'epochs_run', 'converged', 'atoms'])
        return phasebooks

    def target_statistics(self, records, bins=100):
        values, phases, weights = [], [], []
        r_top = max(self.r_max_list) if self.r_max_list else self.r_max
        for record in records:
            X, S = self.spectra(record)
            for index in range(S.shape[0]):
                values.append(oracle_mask('IAM', S[index], X=X, r_max=r_top).values.reshape(-1))
                phases.append(phase_difference(S[index], X).reshape(-1))
                weights.append((X.abs() ** 2).reshape(-1))
        weights = torch.cat(weights)
        rows = []
        for name, data, value_range in (('iam', torch.cat(values), (0., r_top)),
                                        ('phase_difference', torch.cat(phases), (-np.pi, np.pi))):
            density, edges = mask_histogram(data, bins, value_range, weights)
            rows += [{'quantity': name, 'bin_left': left, 'bin_right': right, 'density': value}
                     for left, right, value in zip(edges[:-1], edges[1:], density)]
        write_csv(self.output_path('mask_histogram.csv'), rows, ['quantity', 'bin_left', 'bin_right', 'density'])

    @time_cost('oracle-study')
    def run(self):
        records = self.load_records()
        phasebooks = {('uniform', size): fixed_phasebook(size) for size in self.phasebook_sizes}
        optimized_sizes = ()
        if self.optimize_phasebooks and 'phasebook' in self.phase_sources:
            phasebooks.update(self.optimized_phasebooks(records))
            optimized_sizes = tuple(size for kind, size in phasebooks if kind == 'optimized')
        cells = build_cells(self.mask_kinds, self.r_max_list, self.phase_sources, self.phasebook_sizes, optimized_sizes)
        self.log('oracle study: {} cells on {} mixtures'.format(len(cells), len(records)))
        results = Parallel(n_jobs=self.jobs)(delayed(study_record)(record, cells, self.stft_config, phasebooks)
                                             for record in tqdm(records, desc='oracle-study'))
        rows = [row for record_rows, _ in results for row in record_rows]
        for _, flags in results:
            self.flags.merge(flags)
        frame = pandas.DataFrame(rows)
        frame.to_csv(self.output_path('oracle_study_utterances.csv'), index=False)
        summary = frame.groupby(CELL_COLUMNS, sort=False).agg(
            sisdri_mean=('sisdri_db', 'mean'), sisdri_median=('sisdri_db', 'median'),
            sisdr_mean=('sisdr_db', 'mean')).reset_index()
        summary.to_csv(self.output_path('oracle_study.csv'), index=False)
        self.target_statistics(records)

        table = PrettyTable(['mask', 'r_max', 'phase', 'P', 'phasebook', 'SI-SDRi mean', 'SI-SDRi median'])
        for _, row in summary.iterrows():
            table.add_row([row['mask'], row['r_max'], row['phase_source'], row['phasebook_size'], row['phasebook'],
                           '{:.2f}'.format(row['sisdri_mean']), '{:.2f}'.format(row['sisdri_median'])])
        self.log('oracle study results (dB)\n{}'.format(table))
        return summary
