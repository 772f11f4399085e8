from dataclasses import dataclass, field

import numpy as np
import pandas
from joblib import Parallel, delayed
from prettytable import PrettyTable

from .sisdr import si_sdr, best_permutation
from ..utils import get_logger, write_csv

logger = get_logger(__name__)

REPORT_COLUMNS = ['utt_id', 'source_idx', 'sisdr_db', 'sisdri_db', 'perm']


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def to_frame(self):
        return pandas.DataFrame(self.rows, columns=REPORT_COLUMNS)

    @property
    def sisdr(self):
        return np.array([row['sisdr_db'] for row in self.rows])

    @property
    def sisdri(self):
        return np.array([row['sisdri_db'] for row in self.rows])

    def mean(self):
        return {'sisdr_db': float(np.mean(self.sisdr)), 'sisdri_db': float(np.mean(self.sisdri))}

    def median(self):
        return {'sisdr_db': float(np.median(self.sisdr)), 'sisdri_db': float(np.median(self.sisdri))}

    def permutations(self):
        return {row['utt_id']: tuple(int(p) for p in row['perm'].split('-')) for row in self.rows}

    def write_csv(self, path):
        return write_csv(path, self.rows, REPORT_COLUMNS)

    def summary_table(self, title='SI-SDR (dB)'):
        table = PrettyTable([title, 'SI-SDR', 'SI-SDRi'])
        mean, median = self.mean(), self.median()
        table.add_row(['mean', '{:.2f}'.format(mean['sisdr_db']), '{:.2f}'.format(mean['sisdri_db'])])
        table.add_row(['median', '{:.2f}'.format(median['sisdr_db']), '{:.2f}'.format(median['sisdri_db'])])
        table.add_row(['sources', len(self.rows), len(set(row['utt_id'] for row in self.rows))])
        return table


def evaluate_utterance(utt_id, estimates, references, mixture):
    """Rows of one utterance under the permutation maximising total SI-SDR."""
    if len(estimates) != len(references):
        raise ValueError('utterance {}: {} estimates for {} references'.format(utt_id, len(estimates), len(references)))
    scores = [[si_sdr(estimate, reference) for estimate in estimates] for reference in references]
    perm, _ = best_permutation(scores)
    label = '-'.join(str(p) for p in perm)
    rows = []
    for index, reference in enumerate(references):
        baseline = si_sdr(mixture, reference)
        value = scores[index][perm[index]]
        rows.append({'utt_id': utt_id, 'source_idx': index, 'sisdr_db': value,
                     'sisdri_db': value - baseline, 'perm': label})
    return rows


def evaluate_corpus(estimates, references, mixtures, ids=None, jobs=1):
    """Per-utterance SI-SDR / SI-SDRi against the unprocessed mixture baseline."""
    if not len(estimates) == len(references) == len(mixtures):
        raise ValueError('estimates ({}), references ({}) and mixtures ({}) must align'.format(
            len(estimates), len(references), len(mixtures)))
    ids = ids if ids is not None else ['utt{:04d}'.format(i) for i in range(len(mixtures))]
    if len(ids) != len(mixtures):
        raise ValueError('{} ids for {} utterances'.format(len(ids), len(mixtures)))
    results = Parallel(n_jobs=jobs)(delayed(evaluate_utterance)(utt_id, est, ref, mix)
                                    for utt_id, est, ref, mix in zip(ids, estimates, references, mixtures))
    report = EvalReport([row for rows in results for row in rows])
    if report.rows:
        logger.info('evaluated {} utterances: mean SI-SDRi {:.2f} dB'.format(len(ids), report.mean()['sisdri_db']))
    return report
