from .sisdr import si_sdr, si_sdr_tensor, best_permutation
from .eval_report import EvalReport, evaluate_corpus, evaluate_utterance
