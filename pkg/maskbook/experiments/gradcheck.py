import torch
from prettytable import PrettyTable

from .. import constants
from ..codebook import uniform_magbook
from ..codebook_opt import uniform_phasebook
from ..grad import CodebookSet, LogitField, LossSpec, grad_check, make_problem, value_and_grad
from ..stft import StftConfig, stft
from ..utils import write_csv, time_cost
from .base import Base

RESULT_COLUMNS = ['loss', 'parameter', 'max_rel_error', 'passed']


def random_problem(length, config, n_source=2, seed=0):
    generator = torch.Generator().manual_seed(int(seed))
    sources = torch.randn(n_source, length, generator=generator, dtype=torch.float64)
    mixture = sources.sum(0)
    return make_problem(stft(mixture, config), sources, x_time=mixture, config=config)


def check_loss(loss_name, problem, codebooks, seed=0, step=1e-5, tol=1e-5, r_max=constants.DEFAULT_R_MAX):
    """Central differences against autograd for one loss path, over logits and trainable atoms."""
    loss_spec = LossSpec.parse(loss_name, 'L2', r_max)
    loss_spec.pit = False
    field = LogitField.random(tuple(problem.S.shape), codebooks, seed)

    def closure(params):
        loss, grads, _ = value_and_grad(field, codebooks, problem, loss_spec, params)
        return loss, grads

    return grad_check(closure, field.parameters(), step, tol)


class GradCheck(Base):

    @time_cost('gradcheck')
    def run(self):
        config = StftConfig(self.grad_win, self.grad_hop, self.grad_win, self.window, self.sample_rate)
        problem = random_problem(self.grad_length, config, self.n_sources, self.seed)
        codebooks = CodebookSet('magphase', uniform_magbook(3), uniform_phasebook(8), trainable_atoms=True)
        rows = []
        for loss_name in self.grad_losses:
            report = check_loss(loss_name, problem, codebooks, self.seed, self.grad_step, self.grad_tol, self.r_max)
            for key, error in report.errors.items():
                rows.append({'loss': loss_name, 'parameter': key, 'max_rel_error': error, 'passed': error < report.tol})
            if not report.passed:
                self.flags.flag('gradcheck_failed')
        write_csv(self.output_path('gradcheck.csv'), rows, RESULT_COLUMNS)
        table = PrettyTable(['loss', 'parameter', 'max rel. error', 'passed'])
        for row in rows:
            table.add_row([row['loss'], row['parameter'], '{:.2e}'.format(row['max_rel_error']), row['passed']])
        self.log('gradient check on a {}x{} problem\n{}'.format(problem.X.shape[0], problem.X.shape[1], table))
        return rows

    def exit_status(self):
        status = super().exit_status()
        return 1 if self.flags['gradcheck_failed'] else status
