from .base import Base
from .oracle_study import OracleStudy
from .optimize_codebook import OptimizeCodebook
from .fit import Fit
from .misi import MisiRun
from .eval import Eval
from .gradcheck import GradCheck
from .synth import Synth

RUNNERS = {
    'oracle-study': OracleStudy,
    'optimize-codebook': OptimizeCodebook,
    'fit': Fit,
    'misi': MisiRun,
    'eval': Eval,
    'gradcheck': GradCheck,
    'synth': Synth,
}
