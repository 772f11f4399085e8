from ..codebook import load_codebook, save_codebook, uniform_magbook
from ..codebook_opt import optimize_phasebook, optimize_magbook_phasebook, optimize_combook, \
                    uniform_phasebook, uniform_combook, random_codebook
from ..utils import write_csv, time_cost
from .base import Base

TRACE_COLUMNS = ['epoch', 'step', 'objective']
ATOM_COLUMNS = ['epoch', 'codebook', 'index', 'real', 'imag']


class OptimizeCodebook(Base):

    def initial_codebook(self, kind, size, corpus):
        if self.codebook_init == 'file':
            codebook = load_codebook(self.codebook_path)
            if codebook.kind != kind:
                raise ValueError('{} holds a {}, expected a {}'.format(self.codebook_path, codebook.kind, kind))
            return codebook
        if self.codebook_init == 'random':
            return random_codebook(kind, size, corpus, self.seed, self.r_max)
        if kind == 'phasebook':
            return uniform_phasebook(size)
        if kind == 'magbook':
            return uniform_magbook(size, self.r_max)
        return uniform_combook(size)

    def corpus(self):
        pairs = []
        for record in self.load_records():
            X, S = self.spectra(record)
            pairs += [(S[index], X) for index in range(S.shape[0])]
        return pairs

    @time_cost('optimize-codebook')
    def run(self):
        corpus = self.corpus()
        self.log('optimising a {} of size {} on {} source/mixture pairs'.format(
            self.codebook_kind, self.codebook_size, len(corpus)))
        outputs = {}
        if self.codebook_kind == 'phasebook' and self.magbook_size > 0:
            init_p = self.initial_codebook('phasebook', self.codebook_size, corpus)
            init_m = uniform_magbook(self.magbook_size, self.r_max)
            outputs['magbook'], outputs['phasebook'], report = optimize_magbook_phasebook(init_m, init_p, corpus, self.epochs)
        elif self.codebook_kind == 'phasebook':
            init = self.initial_codebook('phasebook', self.codebook_size, corpus)
            outputs['phasebook'], report = optimize_phasebook(init, corpus, self.m_source, self.epochs, r_max=self.r_max)
        elif self.codebook_kind == 'magbook':
            init_m = self.initial_codebook('magbook', self.codebook_size, corpus)
            init_p = uniform_phasebook(self.phasebook_size)
            outputs['magbook'], outputs['phasebook'], report = optimize_magbook_phasebook(init_m, init_p, corpus, self.epochs)
        else:
            init = self.initial_codebook('combook', self.codebook_size, corpus)
            outputs['combook'], report = optimize_combook(init, corpus, self.epochs, self.r_max)

        for name, codebook in outputs.items():
            save_codebook(self.output_path('{}.txt'.format(name)), codebook)
            self.log('{}: {}'.format(name, ' '.join('{:.4f}'.format(a) for a in codebook.atoms.tolist())))
        write_csv(self.output_path('opt_trace.csv'), report.trace, TRACE_COLUMNS)
        write_csv(self.output_path('atoms_history.csv'), report.atoms_history, ATOM_COLUMNS)
        if not report.is_monotone():
            self.flags.flag('non_monotone_objective')
        self.log('{} epochs run, converged: {}, objective {:.6e} -> {:.6e}'.format(
            report.epochs_run, report.converged, report.objectives[0], report.objectives[-1]))
        return outputs, report
