from ..dataset import read_manifest, read_wav
from ..evaluation import evaluate_corpus
from ..utils import time_cost
from .base import Base


class Eval(Base):
    """Scores the estimates manifest against the reference manifest, matching utterances by id."""

    @time_cost('eval')
    def run(self):
        if not self.manifest or not self.estimates:
            raise ValueError('eval needs a reference manifest and an estimates manifest')
        references = read_manifest(self.manifest)
        estimates = read_manifest(self.estimates)
        known = {entry.id: entry for entry in references.entries}
        missing = [entry.id for entry in estimates.entries if entry.id not in known]
        if missing:
            raise ValueError('estimates without references: {}'.format(missing))
        ids, est, refs, mixtures = [], [], [], []
        for entry in estimates.entries:
            reference = known[entry.id]
            ids.append(entry.id)
            est.append([read_wav(estimates.path(path)).samples for path in entry.sources])
            refs.append([read_wav(references.path(path)).samples for path in reference.sources])
            mixtures.append(read_wav(references.path(reference.mixture)).samples)
        report = evaluate_corpus(est, refs, mixtures, ids, jobs=self.jobs)
        report.write_csv(self.output_path('eval.csv'))
        self.log('evaluation of {} utterances\n{}'.format(len(ids), report.summary_table()))
        return report
